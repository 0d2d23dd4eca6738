//! Parametric structure descriptions and foundation settings.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::FemError;

/// Default Timoshenko shear correction factor for a thin-walled circular tube.
pub const THIN_TUBE_SHEAR_FACTOR: f64 = 0.53;

/// Shear correction factor for a solid circular section (Cowper, nu = 0.3).
pub const SOLID_SHEAR_FACTOR: f64 = 0.886;

pub const DEFAULT_SEAWATER_DENSITY: f64 = 1030.0;
pub const FRESHWATER_DENSITY: f64 = 1000.0;

fn default_shear_factor() -> f64 {
    THIN_TUBE_SHEAR_FACTOR
}

/// Cross-section properties at a station along a segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Section {
    pub outer_diameter: f64,
    pub wall_thickness: f64,
    pub area: f64,
    pub second_moment: f64,
}

impl Section {
    /// Circular tube. `wall_thickness == outer_diameter / 2` gives a solid bar.
    pub fn tube(outer_diameter: f64, wall_thickness: f64) -> Self {
        let inner = (outer_diameter - 2.0 * wall_thickness).max(0.0);
        let d2 = outer_diameter * outer_diameter;
        let i2 = inner * inner;
        Self {
            outer_diameter,
            wall_thickness,
            area: PI / 4.0 * (d2 - i2),
            second_moment: PI / 64.0 * (d2 * d2 - i2 * i2),
        }
    }

    /// Area enclosed by the outer surface.
    pub fn enclosed_area(&self) -> f64 {
        PI / 4.0 * self.outer_diameter * self.outer_diameter
    }
}

/// A linearly tapered tubular beam segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamSegment {
    pub length: f64,
    pub outer_diameter_base: f64,
    pub outer_diameter_top: f64,
    pub wall_thickness_base: f64,
    pub wall_thickness_top: f64,
    pub density: f64,
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    #[serde(default = "default_shear_factor")]
    pub shear_correction_factor: f64,
}

impl BeamSegment {
    /// Section at fractional position `t` in [0, 1] from the segment base.
    pub fn section_at(&self, t: f64) -> Section {
        let d = self.outer_diameter_base + (self.outer_diameter_top - self.outer_diameter_base) * t;
        let w = self.wall_thickness_base + (self.wall_thickness_top - self.wall_thickness_base) * t;
        Section::tube(d, w)
    }

    pub fn shear_modulus(&self) -> f64 {
        self.youngs_modulus / (2.0 * (1.0 + self.poisson_ratio))
    }

    pub fn mass(&self) -> f64 {
        // Area is quadratic in the taper parameter; Simpson's rule is exact.
        let a = |t| self.section_at(t).area;
        self.density * self.length * (a(0.0) + 4.0 * a(0.5) + a(1.0)) / 6.0
    }

    fn validate(&self, index: usize) -> Result<(), FemError> {
        let bad = |msg: String| Err(FemError::Geometry(format!("segment {index}: {msg}")));
        let finite = [
            self.length,
            self.outer_diameter_base,
            self.outer_diameter_top,
            self.wall_thickness_base,
            self.wall_thickness_top,
            self.density,
            self.youngs_modulus,
            self.poisson_ratio,
            self.shear_correction_factor,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("non-finite property".into());
        }
        if self.length <= 0.0 {
            return bad(format!("length {} must be positive", self.length));
        }
        for (d, t, end) in [
            (self.outer_diameter_base, self.wall_thickness_base, "base"),
            (self.outer_diameter_top, self.wall_thickness_top, "top"),
        ] {
            // A wall of exactly half the diameter is a solid section.
            if t <= 0.0 || d < 2.0 * t {
                return bad(format!("{end}: need outer diameter {d} >= 2 x wall {t} > 0"));
            }
        }
        if self.density <= 0.0 || self.youngs_modulus <= 0.0 {
            return bad("density and Young's modulus must be positive".into());
        }
        if !(self.poisson_ratio > -1.0 && self.poisson_ratio < 0.5) {
            return bad(format!("Poisson ratio {} out of range", self.poisson_ratio));
        }
        if !(self.shear_correction_factor > 0.0 && self.shear_correction_factor <= 1.0) {
            return bad(format!("shear correction factor {} not in (0, 1]", self.shear_correction_factor));
        }
        Ok(())
    }
}

/// Kinematic condition at the lowest node (z = 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseFixity {
    /// Axial restraint only. In the single bending plane this leaves the
    /// pile toe laterally free; lateral support comes from the soil springs.
    #[default]
    AxialPin,
    /// Lateral translation fixed, rotation free.
    Pinned,
    /// Translation and rotation fixed.
    Clamped,
}

/// How the submerged length picks up hydrodynamic mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AddedMassModel {
    /// Fluid mass equal to the displaced wall volume; steel at 7850 kg/m^3 in
    /// seawater at 1030 kg/m^3 behaves as 8880 kg/m^3.
    #[default]
    DisplacedWall,
    /// Fluid mass of the full area enclosed by the outer diameter.
    EnclosedArea,
}

/// Tower + monopile + top mass, described from the pile toe (z = 0) upwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureTemplate {
    #[serde(default)]
    pub name: String,
    pub segments: Vec<BeamSegment>,
    /// Lumped translational mass at the free end, kg.
    pub top_mass: f64,
    pub embedded_length: f64,
    pub submerged_length: f64,
    #[serde(default)]
    pub base: BaseFixity,
    #[serde(default)]
    pub added_mass: AddedMassModel,
}

impl StructureTemplate {
    pub fn total_length(&self) -> f64 {
        self.segments.iter().map(|s| s.length).sum()
    }

    /// Elevation of the free surface above the pile toe.
    pub fn waterline(&self) -> f64 {
        self.embedded_length + self.submerged_length
    }

    pub fn validate(&self) -> Result<(), FemError> {
        if self.segments.is_empty() {
            return Err(FemError::Geometry("template has no segments".into()));
        }
        for (i, s) in self.segments.iter().enumerate() {
            s.validate(i)?;
        }
        if !(self.top_mass >= 0.0 && self.top_mass.is_finite()) {
            return Err(FemError::Geometry(format!("top mass {} must be >= 0", self.top_mass)));
        }
        if !(self.embedded_length >= 0.0 && self.submerged_length >= 0.0) {
            return Err(FemError::Geometry("embedded and submerged lengths must be >= 0".into()));
        }
        if self.total_length() <= self.waterline() {
            return Err(FemError::Geometry(format!(
                "total length {} must exceed embedded + submerged length {}",
                self.total_length(),
                self.waterline()
            )));
        }
        Ok(())
    }

    /// Segment and local fraction at elevation `z`.
    pub fn segment_at(&self, z: f64) -> (&BeamSegment, f64) {
        let mut base = 0.0;
        for seg in &self.segments {
            if z <= base + seg.length {
                return (seg, ((z - base) / seg.length).clamp(0.0, 1.0));
            }
            base += seg.length;
        }
        let last = self.segments.last().expect("validated template has segments");
        (last, 1.0)
    }

    /// Total structural mass including the top mass.
    pub fn mass(&self) -> f64 {
        self.segments.iter().map(BeamSegment::mass).sum::<f64>() + self.top_mass
    }

    /// The same structure clamped at z = 0 with no soil and no water.
    pub fn clamped_cantilever(&self) -> Self {
        Self {
            name: format!("{}-clamped", self.name),
            embedded_length: 0.0,
            submerged_length: 0.0,
            base: BaseFixity::Clamped,
            ..self.clone()
        }
    }

    /// Built-in templates: `nrel5mw`, `nrel5mw-tower`, `wavetank`.
    pub fn builtin(name: &str) -> Result<Self, FemError> {
        match name {
            "nrel5mw" => Ok(nrel5mw()),
            "nrel5mw-tower" => Ok(nrel5mw_tower()),
            "wavetank" => Ok(wavetank()),
            other => Err(FemError::UnknownTemplate(other.to_string())),
        }
    }

    pub fn builtin_names() -> &'static [&'static str] {
        &["nrel5mw", "nrel5mw-tower", "wavetank"]
    }
}

const STEEL_E: f64 = 210e9;
const STEEL_NU: f64 = 0.3;

fn nrel_monopile() -> BeamSegment {
    BeamSegment {
        length: 75.0,
        outer_diameter_base: 6.0,
        outer_diameter_top: 6.0,
        wall_thickness_base: 0.0351,
        wall_thickness_top: 0.0351,
        density: 7850.0,
        youngs_modulus: STEEL_E,
        poisson_ratio: STEEL_NU,
        shear_correction_factor: THIN_TUBE_SHEAR_FACTOR,
    }
}

fn nrel_tower() -> BeamSegment {
    BeamSegment {
        length: 87.6,
        outer_diameter_base: 6.0,
        outer_diameter_top: 3.87,
        wall_thickness_base: 0.0351,
        wall_thickness_top: 0.0247,
        // Raised from 7850 to account for secondary steel.
        density: 8500.0,
        youngs_modulus: STEEL_E,
        poisson_ratio: STEEL_NU,
        shear_correction_factor: THIN_TUBE_SHEAR_FACTOR,
    }
}

/// Nacelle/rotor assembly as a solid steel cylinder: 7850 kg/m^3 over
/// 3.439 m diameter and 4.8 m length is the 350 t assembly mass.
fn nrel_nacelle() -> BeamSegment {
    BeamSegment {
        length: 4.8,
        outer_diameter_base: 3.439,
        outer_diameter_top: 3.439,
        wall_thickness_base: 3.439 / 2.0,
        wall_thickness_top: 3.439 / 2.0,
        density: 7850.0,
        youngs_modulus: STEEL_E,
        poisson_ratio: STEEL_NU,
        shear_correction_factor: SOLID_SHEAR_FACTOR,
    }
}

/// NREL 5 MW tower on a 75 m monopile: 45 m embedded, 20 m of water.
pub fn nrel5mw() -> StructureTemplate {
    StructureTemplate {
        name: "nrel5mw".into(),
        segments: vec![nrel_monopile(), nrel_tower(), nrel_nacelle()],
        top_mass: 0.0,
        embedded_length: 45.0,
        submerged_length: 20.0,
        base: BaseFixity::AxialPin,
        added_mass: AddedMassModel::DisplacedWall,
    }
}

/// NREL 5 MW tower and nacelle, clamped at the tower base.
pub fn nrel5mw_tower() -> StructureTemplate {
    StructureTemplate {
        name: "nrel5mw-tower".into(),
        segments: vec![nrel_tower(), nrel_nacelle()],
        top_mass: 0.0,
        embedded_length: 0.0,
        submerged_length: 0.0,
        base: BaseFixity::Clamped,
        added_mass: AddedMassModel::DisplacedWall,
    }
}

pub const WAVETANK_TUBE_MASS: f64 = 0.401;
pub const WAVETANK_TOP_MASS: f64 = 1.28;
pub const COPPER_E: f64 = 117e9;

/// 1.5 m copper tube (15 mm OD, 13.6 mm ID) with a 1.28 kg top mass,
/// 300 mm embedded in foam under 0.7 m of water. Tube density is taken
/// from its 401 g weighed mass including fittings.
pub fn wavetank() -> StructureTemplate {
    let (od, id, len) = (0.015, 0.0136, 1.5);
    let wall = (od - id) / 2.0;
    let density = WAVETANK_TUBE_MASS / (Section::tube(od, wall).area * len);
    StructureTemplate {
        name: "wavetank".into(),
        segments: vec![BeamSegment {
            length: len,
            outer_diameter_base: od,
            outer_diameter_top: od,
            wall_thickness_base: wall,
            wall_thickness_top: wall,
            density,
            youngs_modulus: COPPER_E,
            poisson_ratio: 0.34,
            shear_correction_factor: THIN_TUBE_SHEAR_FACTOR,
        }],
        top_mass: WAVETANK_TOP_MASS,
        embedded_length: 0.3,
        submerged_length: 0.7,
        base: BaseFixity::AxialPin,
        added_mass: AddedMassModel::DisplacedWall,
    }
}

/// Lateral soil support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SoilSupport {
    /// Linear Winkler springs of `stiffness_per_length`.
    #[default]
    Winkler,
    /// Lateral translation fixed at every supported node (no soil compliance).
    Rigid,
}

/// Discretisation of the distributed Winkler springs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpringLayout {
    /// Foundation stiffness integrated with the element's cubic shape functions.
    #[default]
    Consistent,
    /// Nodal springs of stiffness times tributary length (half of each
    /// adjacent supported element).
    Nodal,
}

/// What scour does to the springs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScourModel {
    /// Springs above the scour line are deleted; the rest are unchanged.
    #[default]
    RemoveSprings,
    /// Springs above the scour line are deleted and the remaining stiffness
    /// is scaled by the surviving fraction of the embedded length.
    ReduceEffectiveDepth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoundationModel {
    /// Lateral stiffness per unit embedded length, N/m^2.
    pub stiffness_per_length: f64,
    #[serde(default)]
    pub scour_depth: f64,
    #[serde(default)]
    pub support: SoilSupport,
    #[serde(default)]
    pub springs: SpringLayout,
    #[serde(default)]
    pub scour: ScourModel,
}

impl FoundationModel {
    pub fn winkler(stiffness_per_length: f64, scour_depth: f64) -> Self {
        Self {
            stiffness_per_length,
            scour_depth,
            support: SoilSupport::Winkler,
            springs: SpringLayout::Consistent,
            scour: ScourModel::RemoveSprings,
        }
    }

    pub fn rigid() -> Self {
        Self { support: SoilSupport::Rigid, ..Self::winkler(0.0, 0.0) }
    }

    pub fn with_springs(mut self, springs: SpringLayout) -> Self {
        self.springs = springs;
        self
    }

    pub fn validate(&self, template: &StructureTemplate) -> Result<(), FemError> {
        if !(self.stiffness_per_length >= 0.0 && self.stiffness_per_length.is_finite()) {
            return Err(FemError::Foundation(format!(
                "stiffness per length {} must be finite and >= 0",
                self.stiffness_per_length
            )));
        }
        if !(self.scour_depth >= 0.0) {
            return Err(FemError::Foundation(format!("scour depth {} must be >= 0", self.scour_depth)));
        }
        if self.scour_depth > 0.0 && self.scour_depth >= template.embedded_length {
            return Err(FemError::Foundation(format!(
                "scour depth {} must be below the embedded length {}",
                self.scour_depth, template.embedded_length
            )));
        }
        Ok(())
    }

    /// Elevation of the highest surviving lateral support.
    pub fn support_top(&self, template: &StructureTemplate) -> f64 {
        template.embedded_length - self.scour_depth
    }

    /// Stiffness actually applied to the surviving springs.
    pub fn effective_stiffness(&self, template: &StructureTemplate) -> f64 {
        match self.scour {
            ScourModel::RemoveSprings => self.stiffness_per_length,
            ScourModel::ReduceEffectiveDepth if template.embedded_length > 0.0 => {
                self.stiffness_per_length * self.support_top(template) / template.embedded_length
            }
            ScourModel::ReduceEffectiveDepth => self.stiffness_per_length,
        }
    }
}
