//! Mesh generation and global matrix assembly.

use nalgebra::DMatrix;

use super::element::{self, ElementProps};
use super::template::{AddedMassModel, BaseFixity, FoundationModel, SoilSupport, SpringLayout, StructureTemplate};
use super::FemError;

pub const MIN_ELEMENTS: usize = 10;
pub const DEFAULT_ELEMENTS: usize = 100;

/// Degrees of freedom per node: lateral displacement and rotation.
pub const DOF_PER_NODE: usize = 2;

const Z_TOL: f64 = 1e-9;

/// Global stiffness and mass over all DOFs plus the list of free DOFs.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub stiffness: DMatrix<f64>,
    pub mass: DMatrix<f64>,
    /// Node elevations from the pile toe, ascending.
    pub node_z: Vec<f64>,
    /// Indices of unconstrained DOFs, ascending.
    pub free_dofs: Vec<usize>,
}

impl AssembledSystem {
    pub fn n_nodes(&self) -> usize {
        self.node_z.len()
    }

    pub fn lateral_dof(node: usize) -> usize {
        DOF_PER_NODE * node
    }

    pub fn rotation_dof(node: usize) -> usize {
        DOF_PER_NODE * node + 1
    }

    pub fn free_stiffness(&self) -> DMatrix<f64> {
        self.stiffness.select_rows(&self.free_dofs).select_columns(&self.free_dofs)
    }

    pub fn free_mass(&self) -> DMatrix<f64> {
        self.mass.select_rows(&self.free_dofs).select_columns(&self.free_dofs)
    }
}

/// Node elevations with nodes forced onto segment joints, the scour line,
/// the mudline and the waterline. Elements are shared out between those
/// intervals in proportion to length (largest remainder, at least one each).
pub fn mesh(
    template: &StructureTemplate,
    foundation: &FoundationModel,
    n_elements: usize,
) -> Result<Vec<f64>, FemError> {
    let total = template.total_length();
    let mut breaks = vec![0.0, total];
    let mut z = 0.0;
    for seg in &template.segments {
        z += seg.length;
        breaks.push(z);
    }
    if template.embedded_length > 0.0 {
        breaks.push(template.embedded_length);
        breaks.push(foundation.support_top(template));
    }
    breaks.push(template.waterline());
    breaks.retain(|b| (0.0..=total).contains(b));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < Z_TOL);

    let intervals: Vec<(f64, f64)> = breaks.windows(2).map(|w| (w[0], w[1])).collect();
    if n_elements < MIN_ELEMENTS || n_elements < intervals.len() {
        return Err(FemError::TooFewElements { min: MIN_ELEMENTS.max(intervals.len()), got: n_elements });
    }

    let share: Vec<f64> = intervals.iter().map(|(a, b)| n_elements as f64 * (b - a) / total).collect();
    let mut counts: Vec<usize> = share.iter().map(|s| (s.floor() as usize).max(1)).collect();
    let mut order: Vec<usize> = (0..intervals.len()).collect();
    order.sort_by(|&i, &j| {
        let ri = share[i] - share[i].floor();
        let rj = share[j] - share[j].floor();
        rj.total_cmp(&ri).then(i.cmp(&j))
    });
    let mut assigned: usize = counts.iter().sum();
    let mut k = 0;
    while assigned < n_elements {
        counts[order[k % order.len()]] += 1;
        assigned += 1;
        k += 1;
    }
    // Flooring with the one-element minimum can overshoot; trim the longest elements' intervals.
    while assigned > n_elements {
        let i = (0..counts.len())
            .filter(|&i| counts[i] > 1)
            .max_by(|&i, &j| share[i].total_cmp(&share[j]))
            .expect("n_elements >= interval count");
        counts[i] -= 1;
        assigned -= 1;
    }

    let mut nodes = vec![0.0];
    for (&(a, b), &c) in intervals.iter().zip(&counts) {
        for i in 1..=c {
            nodes.push(if i == c { b } else { a + (b - a) * i as f64 / c as f64 });
        }
    }
    Ok(nodes)
}

/// Assemble K and M for the template on the given foundation.
pub fn build_system(
    template: &StructureTemplate,
    foundation: &FoundationModel,
    n_elements: usize,
    seawater_density: f64,
) -> Result<AssembledSystem, FemError> {
    template.validate()?;
    foundation.validate(template)?;
    if !(seawater_density >= 0.0 && seawater_density.is_finite()) {
        return Err(FemError::Geometry(format!("seawater density {seawater_density} must be >= 0")));
    }
    let node_z = mesh(template, foundation, n_elements)?;
    let n_dof = DOF_PER_NODE * node_z.len();
    let mut k = DMatrix::zeros(n_dof, n_dof);
    let mut m = DMatrix::zeros(n_dof, n_dof);

    let support_top = foundation.support_top(template);
    let spring_k = foundation.effective_stiffness(template);
    let winkler = foundation.support == SoilSupport::Winkler && spring_k > 0.0;

    for e in 0..node_z.len() - 1 {
        let (z0, z1) = (node_z[e], node_z[e + 1]);
        let len = z1 - z0;
        let mid = 0.5 * (z0 + z1);
        let (seg, frac) = template.segment_at(mid);
        let sec = seg.section_at(frac);
        if !(sec.area > 0.0 && sec.second_moment > 0.0) {
            return Err(FemError::Geometry(format!("non-positive section at z = {mid:.3} m")));
        }
        let submerged = mid > template.embedded_length && mid < template.waterline();
        let added = if submerged {
            seawater_density
                * match template.added_mass {
                    AddedMassModel::DisplacedWall => sec.area,
                    AddedMassModel::EnclosedArea => sec.enclosed_area(),
                }
        } else {
            0.0
        };
        let props = ElementProps {
            bending_rigidity: seg.youngs_modulus * sec.second_moment,
            shear_rigidity: seg.shear_correction_factor * seg.shear_modulus() * sec.area,
            mass_per_length: seg.density * sec.area + added,
            rotary_inertia: seg.density * sec.second_moment,
        };
        let mut ke = element::stiffness(&props, len);
        let me = element::mass(&props, len);
        if winkler && foundation.springs == SpringLayout::Consistent && z1 <= support_top + Z_TOL {
            ke += element::foundation(spring_k, len);
        }
        let base = DOF_PER_NODE * e;
        for i in 0..4 {
            for j in 0..4 {
                k[(base + i, base + j)] += ke[(i, j)];
                m[(base + i, base + j)] += me[(i, j)];
            }
        }
    }

    if winkler && foundation.springs == SpringLayout::Nodal {
        for (n, &z) in node_z.iter().enumerate() {
            if z > support_top + Z_TOL {
                continue;
            }
            let below = if n > 0 { 0.5 * (z - node_z[n - 1]) } else { 0.0 };
            let above = match node_z.get(n + 1) {
                Some(&next) if next <= support_top + Z_TOL => 0.5 * (next - z),
                _ => 0.0,
            };
            let dof = AssembledSystem::lateral_dof(n);
            k[(dof, dof)] += spring_k * (below + above);
        }
    }

    let last = DOF_PER_NODE * (node_z.len() - 1);
    m[(last, last)] += template.top_mass;

    let mut fixed = vec![false; n_dof];
    match template.base {
        BaseFixity::AxialPin => {}
        BaseFixity::Pinned => fixed[0] = true,
        BaseFixity::Clamped => {
            fixed[0] = true;
            fixed[1] = true;
        }
    }
    if foundation.support == SoilSupport::Rigid && template.embedded_length > 0.0 {
        for (n, &z) in node_z.iter().enumerate() {
            if z <= support_top + Z_TOL {
                fixed[AssembledSystem::lateral_dof(n)] = true;
            }
        }
    }
    let free_dofs = (0..n_dof).filter(|&d| !fixed[d]).collect();

    Ok(AssembledSystem { stiffness: k, mass: m, node_z, free_dofs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::template::{nrel5mw, nrel5mw_tower, DEFAULT_SEAWATER_DENSITY};

    #[test]
    fn mesh_hits_every_breakpoint() {
        let t = nrel5mw();
        let f = FoundationModel::winkler(1e6, 3.3);
        for n in [10, 37, 100, 250] {
            let z = mesh(&t, &f, n).unwrap();
            assert_eq!(z.len(), n + 1);
            for b in [0.0, 41.7, 45.0, 65.0, 75.0, 162.6, 167.4] {
                assert!(z.iter().any(|&x| (x - b).abs() < 1e-9), "n={n} missing {b}");
            }
            assert!(z.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn too_few_elements_rejected() {
        let t = nrel5mw();
        let f = FoundationModel::winkler(1e6, 0.0);
        assert!(matches!(mesh(&t, &f, 9), Err(FemError::TooFewElements { .. })));
    }

    #[test]
    fn assembled_matrices_exactly_symmetric() {
        let t = nrel5mw();
        for f in
            [FoundationModel::winkler(3e6, 2.0), FoundationModel::winkler(3e6, 2.0).with_springs(SpringLayout::Nodal)]
        {
            let s = build_system(&t, &f, 80, DEFAULT_SEAWATER_DENSITY).unwrap();
            assert_eq!(s.stiffness, s.stiffness.transpose());
            assert_eq!(s.mass, s.mass.transpose());
        }
    }

    #[test]
    fn zero_stiffness_springs_add_nothing() {
        let t = nrel5mw();
        let bare = build_system(&t, &FoundationModel::winkler(0.0, 0.0), 60, 1030.0).unwrap();
        let f = FoundationModel::winkler(2.5e6, 0.0).with_springs(SpringLayout::Nodal);
        let sprung = build_system(&t, &f, 60, 1030.0).unwrap();
        assert_eq!(bare.mass, sprung.mass);
        let diff = &sprung.stiffness - &bare.stiffness;
        let support_top = t.embedded_length;
        let mut total_spring = 0.0;
        for r in 0..diff.nrows() {
            for c in 0..diff.ncols() {
                if diff[(r, c)] == 0.0 {
                    continue;
                }
                assert_eq!(r, c, "nodal springs only touch the diagonal");
                assert_eq!(r % DOF_PER_NODE, 0, "only lateral DOFs");
                assert!(sprung.node_z[r / DOF_PER_NODE] <= support_top + 1e-9);
                total_spring += diff[(r, c)];
            }
        }
        // tributary lengths tile the embedded length
        assert!((total_spring - 2.5e6 * support_top).abs() / (2.5e6 * support_top) < 1e-12);
    }

    #[test]
    fn submerged_wall_density_reproduces_8880() {
        let t = nrel5mw();
        let sea = build_system(&t, &FoundationModel::winkler(1e6, 0.0), 100, 1030.0).unwrap();
        let dry = build_system(&t, &FoundationModel::winkler(1e6, 0.0), 100, 0.0).unwrap();
        let sec = t.segments[0].section_at(0.0);
        // total added translational mass over 20 m of water
        let n = sea.n_nodes();
        let ones: nalgebra::DVector<f64> = nalgebra::DVector::from_fn(2 * n, |i, _| if i % 2 == 0 { 1.0 } else { 0.0 });
        let added = (ones.transpose() * (&sea.mass - &dry.mass) * &ones)[0];
        let effective_density = 7850.0 + added / (sec.area * 20.0);
        assert!((effective_density - 8880.0).abs() < 1e-6, "{effective_density}");
    }

    #[test]
    fn base_fixity_sets_free_dofs() {
        let tower = build_system(&nrel5mw_tower(), &FoundationModel::winkler(0.0, 0.0), 20, 0.0).unwrap();
        assert_eq!(tower.free_dofs[0], 2);
        let pile = build_system(&nrel5mw(), &FoundationModel::winkler(1e6, 0.0), 20, 0.0).unwrap();
        assert_eq!(pile.free_dofs.len(), 2 * pile.n_nodes());
        let rigid = build_system(&nrel5mw(), &FoundationModel::rigid(), 40, 0.0).unwrap();
        for (n, &z) in rigid.node_z.iter().enumerate() {
            let lateral_free = rigid.free_dofs.contains(&AssembledSystem::lateral_dof(n));
            assert_eq!(lateral_free, z > 45.0 + 1e-9);
            assert!(rigid.free_dofs.contains(&AssembledSystem::rotation_dof(n)));
        }
    }
}
