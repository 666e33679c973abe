//! Scalar LP characteristic function of a step-wise radial profile.
//!
//! The trial propagation constant is carried as `t = n_eff² - n_clad²`, and
//! every layer as its contrast `c_j = n_j² - n_clad²`, so the local radial
//! wavenumber squared is `k0² (c_j - t)` without cancellation between two
//! nearly equal indices.
//!
//! The field `ψ` and its slope are propagated outwards with per-layer
//! transfer matrices `M(b) M(a)⁻¹`. Those are independent of the chosen
//! cylinder-function basis, so the propagated state is an analytic function
//! of `t` and does not jump where a layer switches between the oscillatory
//! (`J`, `Y`) and evanescent (`I`, `K`) regimes. The innermost layer starts
//! from the regular solution scaled by `κ^-l` (or `γ^-l`), which also tends
//! to the same limit from both sides. The returned value is
//!
//! ```text
//! F(t) = ψ(R) · γ K_l'(γR) / K_l(γR) - ψ'(R)
//! ```
//!
//! at the last interface `R`, which vanishes exactly when the interior field
//! joins the decaying cladding solution.

use std::f64::consts::PI;

use crate::bessel::{
    bessel_i_seq, bessel_j_seq, bessel_k_seq, bessel_y_seq, i_with_slope, j_or_y_with_slope,
    k_with_slope, ValueSlope,
};
use crate::materials::{FiberProfile, MaterialError};

/// Below this local argument the layer is treated as exactly at its
/// regime boundary and the power-law solutions are used.
const FLAT_ARGUMENT: f64 = 1e-9;

/// Profile frozen at one wavelength.
#[derive(Debug, Clone)]
pub(crate) struct LayerStack {
    pub k0: f64,
    pub radii: Vec<f64>,
    pub contrast: Vec<f64>,
    pub n_clad: f64,
}

/// Characteristic value together with the magnitude of the two terms it is
/// built from, used to judge residuals.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Evaluation {
    pub value: f64,
    pub scale: f64,
}

impl LayerStack {
    pub fn new(profile: &FiberProfile, wavelength_um: f64) -> Result<Self, MaterialError> {
        let contrast = (0..profile.layers().len())
            .map(|j| profile.layer_contrast(j, wavelength_um))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(LayerStack {
            k0: 2.0 * PI / wavelength_um,
            radii: profile.layers().iter().map(|l| l.outer_radius_um).collect(),
            contrast,
            n_clad: profile.cladding_index(wavelength_um)?,
        })
    }

    pub fn n_eff(&self, t: f64) -> f64 {
        (self.n_clad * self.n_clad + t).sqrt()
    }

    /// `n_eff - n_clad` with full relative precision.
    pub fn excess(&self, t: f64) -> f64 {
        t / (self.n_eff(t) + self.n_clad)
    }

    pub fn t_from_n_eff(&self, n_eff: f64) -> f64 {
        (n_eff - self.n_clad) * (n_eff + self.n_clad)
    }

    pub fn evaluate(&self, l: usize, t: f64) -> Evaluation {
        let last = self.radii.len() - 1;
        let mut state = regular_start(l, self.k0 * self.k0 * (self.contrast[0] - t), self.radii[0]);
        for j in 1..=last {
            let basis = Basis::new(l, self.k0 * self.k0 * (self.contrast[j] - t));
            state = basis.transfer(self.radii[j - 1], self.radii[j], state);
        }
        let gamma = self.k0 * t.sqrt();
        let radius = self.radii[last];
        let k = k_with_slope(&bessel_k_seq(l + 1, gamma * radius), l);
        let log_slope = gamma * k.slope / k.value;
        let a = state.value * log_slope;
        Evaluation {
            value: a - state.slope,
            scale: a.abs() + state.slope.abs(),
        }
    }
}

/// Regular solution of the innermost layer at radius `r`, normalised so it
/// behaves like `(r/2)^l / l!` near the axis on both sides of `s = 0`.
fn regular_start(l: usize, s: f64, r: f64) -> ValueSlope {
    let root = s.abs().sqrt();
    let x = root * r;
    if x < FLAT_ARGUMENT {
        let norm = (0..l).fold(1.0, |acc, i| acc * 2.0 * (i + 1) as f64);
        let value = r.powi(l as i32) / norm;
        let slope = if l == 0 {
            0.0
        } else {
            l as f64 * r.powi(l as i32 - 1) / norm
        };
        return ValueSlope { value, slope };
    }
    let f = if s > 0.0 {
        j_or_y_with_slope(&bessel_j_seq(l + 1, x), l)
    } else {
        i_with_slope(&bessel_i_seq(l + 1, x), l)
    };
    let scale = root.powi(l as i32);
    ValueSlope {
        value: f.value / scale,
        slope: f.slope * root / scale,
    }
}

/// A pair of independent radial solutions with their Wronskian.
enum Basis {
    Oscillatory { l: usize, kappa: f64 },
    Evanescent { l: usize, gamma: f64 },
    Flat { l: usize },
}

struct Pair {
    f: ValueSlope,
    g: ValueSlope,
    wronskian: f64,
}

impl Basis {
    fn new(l: usize, s: f64) -> Self {
        let root = s.abs().sqrt();
        if root == 0.0 {
            Basis::Flat { l }
        } else if s > 0.0 {
            Basis::Oscillatory { l, kappa: root }
        } else {
            Basis::Evanescent { l, gamma: root }
        }
    }

    fn at(&self, r: f64, outer: f64) -> Pair {
        match *self {
            Basis::Oscillatory { l, kappa } if kappa * outer >= FLAT_ARGUMENT => {
                let x = kappa * r;
                let f = j_or_y_with_slope(&bessel_j_seq(l + 1, x), l);
                let g = j_or_y_with_slope(&bessel_y_seq(l + 1, x), l);
                Pair {
                    f: scale_slope(f, kappa),
                    g: scale_slope(g, kappa),
                    wronskian: 2.0 / (PI * r),
                }
            }
            Basis::Evanescent { l, gamma } if gamma * outer >= FLAT_ARGUMENT => {
                let x = gamma * r;
                let f = i_with_slope(&bessel_i_seq(l + 1, x), l);
                let g = k_with_slope(&bessel_k_seq(l + 1, x), l);
                Pair {
                    f: scale_slope(f, gamma),
                    g: scale_slope(g, gamma),
                    wronskian: -1.0 / r,
                }
            }
            Basis::Oscillatory { l, .. } | Basis::Evanescent { l, .. } | Basis::Flat { l } => {
                flat_pair(l, r)
            }
        }
    }

    /// Carries `(ψ, ψ')` from radius `a` to radius `b`.
    fn transfer(&self, a: f64, b: f64, state: ValueSlope) -> ValueSlope {
        let pa = self.at(a, b);
        let pb = self.at(b, b);
        let ca = (pa.g.slope * state.value - pa.g.value * state.slope) / pa.wronskian;
        let cb = (pa.f.value * state.slope - pa.f.slope * state.value) / pa.wronskian;
        ValueSlope {
            value: ca * pb.f.value + cb * pb.g.value,
            slope: ca * pb.f.slope + cb * pb.g.slope,
        }
    }
}

fn scale_slope(v: ValueSlope, k: f64) -> ValueSlope {
    ValueSlope {
        value: v.value,
        slope: v.slope * k,
    }
}

/// Solutions of the radial equation with zero local wavenumber.
fn flat_pair(l: usize, r: f64) -> Pair {
    if l == 0 {
        Pair {
            f: ValueSlope {
                value: 1.0,
                slope: 0.0,
            },
            g: ValueSlope {
                value: r.ln(),
                slope: 1.0 / r,
            },
            wronskian: 1.0 / r,
        }
    } else {
        let li = l as i32;
        let lf = l as f64;
        Pair {
            f: ValueSlope {
                value: r.powi(li),
                slope: lf * r.powi(li - 1),
            },
            g: ValueSlope {
                value: r.powi(-li),
                slope: -lf * r.powi(-li - 1),
            },
            wronskian: -2.0 * lf / r,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::MaterialKind;

    fn stack() -> LayerStack {
        LayerStack::new(&FiberProfile::ring_core(MaterialKind::ScaledSilica), 1.55).unwrap()
    }

    #[test]
    fn continuous_across_inner_layer_regime_switch() {
        let s = stack();
        let c1 = s.contrast[0];
        for l in 0..5 {
            let below = s.evaluate(l, c1 * (1.0 - 1e-11)).value;
            let at = s.evaluate(l, c1).value;
            let above = s.evaluate(l, c1 * (1.0 + 1e-11)).value;
            let scale = s.evaluate(l, c1).scale;
            assert!((below - at).abs() < 1e-7 * scale, "l={l}");
            assert!((above - at).abs() < 1e-7 * scale, "l={l}");
        }
    }

    #[test]
    fn transfer_is_basis_independent() {
        // the same layer propagated with J/Y versus a Flat basis at tiny s
        for l in 0..3 {
            let start = ValueSlope {
                value: 0.7,
                slope: -0.2,
            };
            let tiny = Basis::Oscillatory { l, kappa: 1e-6 }.transfer(3.0, 10.0, start);
            let flat = Basis::Flat { l }.transfer(3.0, 10.0, start);
            assert!((tiny.value - flat.value).abs() < 1e-9 * flat.value.abs().max(1.0));
            assert!((tiny.slope - flat.slope).abs() < 1e-9 * flat.slope.abs().max(1.0));
        }
    }

    #[test]
    fn regular_start_limits_agree() {
        for l in 0..4 {
            let a = regular_start(l, 1e-14, 3.0);
            let b = regular_start(l, -1e-14, 3.0);
            let c = regular_start(l, 0.0, 3.0);
            assert!((a.value - c.value).abs() < 1e-10 * c.value.abs().max(1e-300));
            assert!((b.value - c.value).abs() < 1e-10 * c.value.abs().max(1e-300));
        }
    }
}
