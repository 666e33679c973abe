//! Glass dispersion models and radial index profiles.
//!
//! Wavelengths are in µm throughout this module. Relative index differences
//! follow `Δ = (n_layer - n_clad) / n_clad`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::diagnostics::{Diagnostic, Diagnostics};
use crate::textfile::{parse_number, read_sections};

/// Wavelength domain accepted by [`material_index`], µm.
pub const WAVELENGTH_DOMAIN_UM: (f64, f64) = (0.5, 2.0);

/// Wavelength at which layer blend fractions are calibrated against Δ, µm.
pub const CALIBRATION_WAVELENGTH_UM: f64 = 1.55;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaterialError {
    #[error("wavelength {0} µm outside the model domain [0.5, 2.0] µm")]
    WavelengthOutOfDomain(f64),
    #[error("wavelength {0} µm coincides with a Sellmeier resonance")]
    Singularity(f64),
    #[error("blend fraction {0} outside [0, 1]")]
    BlendFraction(f64),
    #[error("invalid Sellmeier coefficients: {0}")]
    Coefficients(String),
    #[error("invalid fiber profile: {0}")]
    Profile(String),
    #[error(
        "layer {layer}: Δ = {delta} cannot be reached with a germania blend fraction in [0, 1]"
    )]
    Calibration { layer: usize, delta: f64 },
}

/// One Sellmeier oscillator, `B λ² / (λ² - C²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SellmeierTerm {
    pub amplitude: f64,
    /// Resonance wavelength `C`, µm.
    pub resonance_um: f64,
}

/// Three-term Sellmeier equation `n² = 1 + Σ B_i λ² / (λ² - C_i²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sellmeier {
    pub terms: [SellmeierTerm; 3],
}

const fn term(amplitude: f64, resonance_um: f64) -> SellmeierTerm {
    SellmeierTerm {
        amplitude,
        resonance_um,
    }
}

impl Sellmeier {
    /// Fused silica (Malitson, 1965).
    pub const FUSED_SILICA: Sellmeier = Sellmeier {
        terms: [
            term(0.696_166_3, 0.068_404_3),
            term(0.407_942_6, 0.116_241_4),
            term(0.897_479_4, 9.896_161),
        ],
    };

    /// Pure germania glass (Fleming, 1984).
    pub const GERMANIA: Sellmeier = Sellmeier {
        terms: [
            term(0.806_866_42, 0.068_972_606),
            term(0.718_158_48, 0.153_966_05),
            term(0.854_168_31, 11.841_931),
        ],
    };

    pub fn new(terms: [SellmeierTerm; 3]) -> Result<Self, MaterialError> {
        for t in &terms {
            if !(t.amplitude.is_finite() && t.amplitude > 0.0) {
                return Err(MaterialError::Coefficients(format!(
                    "amplitude {} must be positive",
                    t.amplitude
                )));
            }
            if !(t.resonance_um.is_finite() && t.resonance_um > 0.0) {
                return Err(MaterialError::Coefficients(format!(
                    "resonance wavelength {} must be positive",
                    t.resonance_um
                )));
            }
        }
        Ok(Sellmeier { terms })
    }

    /// Linear interpolation of every coefficient towards `other`.
    pub fn blend(&self, other: &Sellmeier, fraction: f64) -> Sellmeier {
        let mut terms = self.terms;
        for (t, o) in terms.iter_mut().zip(&other.terms) {
            t.amplitude += fraction * (o.amplitude - t.amplitude);
            t.resonance_um += fraction * (o.resonance_um - t.resonance_um);
        }
        Sellmeier { terms }
    }

    /// `n² - 1` without domain checks.
    fn susceptibility(&self, wavelength_um: f64) -> f64 {
        let l2 = wavelength_um * wavelength_um;
        self.terms
            .iter()
            .map(|t| t.amplitude * l2 / (l2 - t.resonance_um * t.resonance_um))
            .sum()
    }

    fn check(&self, wavelength_um: f64) -> Result<(), MaterialError> {
        let (lo, hi) = WAVELENGTH_DOMAIN_UM;
        if !(lo..=hi).contains(&wavelength_um) {
            return Err(MaterialError::WavelengthOutOfDomain(wavelength_um));
        }
        let l2 = wavelength_um * wavelength_um;
        if self
            .terms
            .iter()
            .any(|t| (l2 - t.resonance_um * t.resonance_um).abs() <= 1e-12 * l2)
        {
            return Err(MaterialError::Singularity(wavelength_um));
        }
        Ok(())
    }

    pub fn index(&self, wavelength_um: f64) -> Result<f64, MaterialError> {
        self.check(wavelength_um)?;
        Ok((1.0 + self.susceptibility(wavelength_um)).sqrt())
    }

    /// `n`, `dn/dλ` and `d²n/dλ²` from the closed-form derivatives.
    pub fn index_derivatives(&self, wavelength_um: f64) -> Result<[f64; 3], MaterialError> {
        self.check(wavelength_um)?;
        let l = wavelength_um;
        let l2 = l * l;
        // u = n², u' and u'' term by term: B λ²/(λ²-C²) = B (1 + C²/(λ²-C²))
        let mut u = 1.0;
        let mut du = 0.0;
        let mut d2u = 0.0;
        for t in &self.terms {
            let c2 = t.resonance_um * t.resonance_um;
            let q = l2 - c2;
            u += t.amplitude * l2 / q;
            du += -2.0 * t.amplitude * c2 * l / (q * q);
            d2u += 2.0 * t.amplitude * c2 * (3.0 * l2 + c2) / (q * q * q);
        }
        let n = u.sqrt();
        let dn = du / (2.0 * n);
        let d2n = (d2u - 2.0 * dn * dn) / (2.0 * n);
        Ok([n, dn, d2n])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaterialKind {
    /// Every layer is the cladding glass scaled by `1 + Δ`.
    #[default]
    ScaledSilica,
    /// Every layer is a silica/germania Sellmeier blend whose fraction is
    /// calibrated so the index at 1550 nm equals `n_clad (1 + Δ)`.
    SellmeierBlend,
}

impl fmt::Display for MaterialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MaterialKind::ScaledSilica => "scaled-silica",
            MaterialKind::SellmeierBlend => "sellmeier-blend",
        })
    }
}

impl FromStr for MaterialKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "scaled-silica" => Ok(MaterialKind::ScaledSilica),
            "sellmeier-blend" => Ok(MaterialKind::SellmeierBlend),
            other => Err(format!(
                "unknown material model `{other}` (expected scaled-silica or sellmeier-blend)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialModel {
    pub kind: MaterialKind,
    pub silica: Sellmeier,
    pub germania: Sellmeier,
}

impl MaterialModel {
    pub fn new(kind: MaterialKind) -> Self {
        MaterialModel {
            kind,
            silica: Sellmeier::FUSED_SILICA,
            germania: Sellmeier::GERMANIA,
        }
    }

    fn glass(&self, blend_fraction: f64) -> Sellmeier {
        match self.kind {
            MaterialKind::ScaledSilica => self.silica,
            MaterialKind::SellmeierBlend => self.silica.blend(&self.germania, blend_fraction),
        }
    }
}

impl Default for MaterialModel {
    fn default() -> Self {
        MaterialModel::new(MaterialKind::default())
    }
}

/// Refractive index of the model glass with the given germania fraction.
///
/// The fraction is ignored under [`MaterialKind::ScaledSilica`].
pub fn material_index(
    model: &MaterialModel,
    blend_fraction: f64,
    wavelength_um: f64,
) -> Result<f64, MaterialError> {
    if !(0.0..=1.0).contains(&blend_fraction) {
        return Err(MaterialError::BlendFraction(blend_fraction));
    }
    model.glass(blend_fraction).index(wavelength_um)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layer {
    pub outer_radius_um: f64,
    pub delta: f64,
}

/// Step-wise radial index profile: layers from the axis outwards, then an
/// unbounded cladding of the undoped model glass.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberProfile {
    pub name: String,
    layers: Vec<Layer>,
    material: MaterialModel,
    /// Germania fraction per layer (all zero for scaled silica).
    blend: Vec<f64>,
}

impl FiberProfile {
    /// Builds a profile. Radii must be positive and strictly increasing and
    /// deltas finite. A profile without any raised layer is accepted (it just
    /// guides nothing); see [`FiberProfile::is_guiding`].
    pub fn new(
        name: impl Into<String>,
        layers: Vec<Layer>,
        material: MaterialModel,
    ) -> Result<Self, MaterialError> {
        if layers.is_empty() {
            return Err(MaterialError::Profile("no layers".into()));
        }
        let mut previous = 0.0;
        for (i, layer) in layers.iter().enumerate() {
            if !(layer.outer_radius_um.is_finite() && layer.outer_radius_um > previous) {
                return Err(MaterialError::Profile(format!(
                    "layer {} radius {} µm must exceed {} µm",
                    i + 1,
                    layer.outer_radius_um,
                    previous
                )));
            }
            if !layer.delta.is_finite() || layer.delta <= -1.0 {
                return Err(MaterialError::Profile(format!(
                    "layer {} delta {} is not a valid relative index difference",
                    i + 1,
                    layer.delta
                )));
            }
            previous = layer.outer_radius_um;
        }
        let blend = match material.kind {
            MaterialKind::ScaledSilica => vec![0.0; layers.len()],
            MaterialKind::SellmeierBlend => layers
                .iter()
                .enumerate()
                .map(|(i, l)| {
                    calibrate_blend(&material, l.delta).ok_or(MaterialError::Calibration {
                        layer: i + 1,
                        delta: l.delta,
                    })
                })
                .collect::<Result<_, _>>()?,
        };
        Ok(FiberProfile {
            name: name.into(),
            layers,
            material,
            blend,
        })
    }

    /// The ring-core design: 3 µm inner layer at Δ = 0.21 %, 10 µm core
    /// ring at Δ = 0.72 %.
    pub fn ring_core(material: MaterialKind) -> Self {
        FiberProfile::new(
            "ring-core-7LP",
            vec![
                Layer {
                    outer_radius_um: 3.0,
                    delta: 0.0021,
                },
                Layer {
                    outer_radius_um: 10.0,
                    delta: 0.0072,
                },
            ],
            MaterialModel::new(material),
        )
        .expect("built-in profile is valid")
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn material(&self) -> &MaterialModel {
        &self.material
    }

    pub fn blend_fractions(&self) -> &[f64] {
        &self.blend
    }

    pub fn is_guiding(&self) -> bool {
        self.layers.iter().any(|l| l.delta > 0.0)
    }

    pub fn cladding_index(&self, wavelength_um: f64) -> Result<f64, MaterialError> {
        self.material.silica.index(wavelength_um)
    }

    /// `[n, dn/dλ, d²n/dλ²]` of the cladding glass.
    pub fn cladding_derivatives(&self, wavelength_um: f64) -> Result<[f64; 3], MaterialError> {
        self.material.silica.index_derivatives(wavelength_um)
    }

    pub fn layer_index(&self, layer: usize, wavelength_um: f64) -> Result<f64, MaterialError> {
        match self.material.kind {
            MaterialKind::ScaledSilica => {
                Ok(self.cladding_index(wavelength_um)? * (1.0 + self.layers[layer].delta))
            }
            MaterialKind::SellmeierBlend => {
                material_index(&self.material, self.blend[layer], wavelength_um)
            }
        }
    }

    /// `n_layer² - n_clad²`, evaluated without forming the two squares
    /// separately so the small difference keeps full relative precision.
    pub(crate) fn layer_contrast(
        &self,
        layer: usize,
        wavelength_um: f64,
    ) -> Result<f64, MaterialError> {
        let delta = self.layers[layer].delta;
        match self.material.kind {
            MaterialKind::ScaledSilica => {
                let n = self.cladding_index(wavelength_um)?;
                Ok(n * n * delta * (2.0 + delta))
            }
            MaterialKind::SellmeierBlend => {
                let glass = self.material.glass(self.blend[layer]);
                glass.check(wavelength_um)?;
                let l2 = wavelength_um * wavelength_um;
                Ok(glass
                    .terms
                    .iter()
                    .zip(&self.material.silica.terms)
                    .map(|(g, s)| {
                        let cg = g.resonance_um * g.resonance_um;
                        let cs = s.resonance_um * s.resonance_um;
                        // B_g λ²/(λ²-C_g²) - B_s λ²/(λ²-C_s²)
                        l2 * ((g.amplitude - s.amplitude) * (l2 - cs) + s.amplitude * (cg - cs))
                            / ((l2 - cg) * (l2 - cs))
                    })
                    .sum())
            }
        }
    }

    /// Index of the layer containing radius `r`; boundaries belong to the
    /// inner layer. `None` means cladding.
    pub fn layer_at(&self, r_um: f64) -> Option<usize> {
        self.layers.iter().position(|l| r_um <= l.outer_radius_um)
    }

    pub fn profile_index(&self, r_um: f64, wavelength_um: f64) -> Result<f64, MaterialError> {
        if !(r_um >= 0.0) {
            return Err(MaterialError::Profile(format!("negative radius {r_um}")));
        }
        match self.layer_at(r_um) {
            Some(layer) => self.layer_index(layer, wavelength_um),
            None => self.cladding_index(wavelength_um),
        }
    }

    /// Highest index anywhere in the profile (the cladding if nothing is raised).
    pub fn max_index(&self, wavelength_um: f64) -> Result<f64, MaterialError> {
        let mut best = self.cladding_index(wavelength_um)?;
        for j in 0..self.layers.len() {
            best = best.max(self.layer_index(j, wavelength_um)?);
        }
        Ok(best)
    }

    /// Parses the `key = value` / `[layer]` profile format.
    pub fn parse(text: &str) -> Result<Self, Diagnostics> {
        let sections = read_sections(text).map_err(Diagnostics)?;
        let mut errors = Vec::new();
        let mut name = String::from("unnamed");
        let mut kind = MaterialKind::default();

        for entry in &sections[0].entries {
            match entry.key.as_str() {
                "name" => name = entry.value.clone(),
                "material_model" => match entry.value.parse() {
                    Ok(k) => kind = k,
                    Err(msg) => errors.push(Diagnostic::at_line(entry.line, msg)),
                },
                other => errors.push(Diagnostic::at_line(
                    entry.line,
                    format!("unknown top-level key `{other}`"),
                )),
            }
        }

        let mut layers = Vec::new();
        let mut previous_radius = 0.0;
        for section in &sections[1..] {
            if section.header.as_deref() != Some("layer") {
                errors.push(Diagnostic::at_line(
                    section.line,
                    format!(
                        "unknown section `[{}]`",
                        section.header.as_deref().unwrap_or("")
                    ),
                ));
                continue;
            }
            let mut radius = None;
            let mut delta = None;
            for entry in &section.entries {
                match entry.key.as_str() {
                    "radius_um" => {
                        radius = parse_number(entry, &mut errors).map(|v| (v, entry.line))
                    }
                    "delta_percent" => delta = parse_number(entry, &mut errors).map(|v| v / 100.0),
                    other => errors.push(Diagnostic::at_line(
                        entry.line,
                        format!("unknown layer key `{other}`"),
                    )),
                }
            }
            let has_radius = section.entries.iter().any(|e| e.key == "radius_um");
            let has_delta = section.entries.iter().any(|e| e.key == "delta_percent");
            if !has_radius {
                errors.push(Diagnostic::at_line(
                    section.line,
                    "layer is missing `radius_um`",
                ));
            }
            if !has_delta {
                errors.push(Diagnostic::at_line(
                    section.line,
                    "layer is missing `delta_percent`",
                ));
            }
            if let Some((r, line)) = radius {
                if r <= previous_radius {
                    errors.push(Diagnostic::at_line(
                        line,
                        format!(
                            "layer radius {r} µm must be greater than the previous radius {previous_radius} µm"
                        ),
                    ));
                } else {
                    previous_radius = r;
                }
            }
            if let (Some((r, _)), Some(d)) = (radius, delta) {
                layers.push(Layer {
                    outer_radius_um: r,
                    delta: d,
                });
            }
        }
        if layers.is_empty() && errors.is_empty() {
            errors.push(Diagnostic::new("profile defines no [layer] sections"));
        }
        if !layers.is_empty() && !layers.iter().any(|l| l.delta > 0.0) {
            errors.push(Diagnostic::new(
                "no layer has a positive delta, the profile cannot guide light",
            ));
        }
        if !errors.is_empty() {
            errors.sort();
            return Err(Diagnostics(errors));
        }
        FiberProfile::new(name, layers, MaterialModel::new(kind))
            .map_err(|e| Diagnostics::from(Diagnostic::new(e.to_string())))
    }

    /// Inverse of [`FiberProfile::parse`].
    pub fn to_file_string(&self) -> String {
        let mut out = format!(
            "name = {}\nmaterial_model = {}\n",
            self.name, self.material.kind
        );
        for l in &self.layers {
            out.push_str(&format!(
                "\n[layer]\nradius_um = {}\ndelta_percent = {}\n",
                crate::fmt::num(l.outer_radius_um),
                crate::fmt::num(l.delta * 100.0)
            ));
        }
        out
    }
}

fn calibrate_blend(model: &MaterialModel, delta: f64) -> Option<f64> {
    if delta == 0.0 {
        return Some(0.0);
    }
    let lambda = CALIBRATION_WAVELENGTH_UM;
    let target = model.silica.index(lambda).ok()? * (1.0 + delta);
    let f = |x: f64| {
        model
            .silica
            .blend(&model.germania, x)
            .index(lambda)
            .map(|n| n - target)
    };
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let (flo, fhi) = (f(lo).ok()?, f(hi).ok()?);
    if flo > 0.0 || fhi < 0.0 {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid).ok()? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}
