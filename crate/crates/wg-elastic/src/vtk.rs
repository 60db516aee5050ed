//! Legacy-VTK ASCII export of polygonal meshes and solutions.
//!
//! The interior displacement field is discontinuous across elements, so the
//! solution writer duplicates vertices per element and samples the interior
//! polynomial there; per-cell data carry the subdomain label and the value at
//! the element centroid.

use std::io::{self, Write};
use std::path::Path;

use crate::mesh::PolyMesh;
use crate::system::DofLayout;
use crate::weakops::WgSpace;

fn header(w: &mut impl Write, title: &str) -> io::Result<()> {
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{title}")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")
}

/// Write the mesh with shared points and the subdomain label per cell.
pub fn write_mesh_vtk(mesh: &PolyMesh, path: &Path) -> io::Result<()> {
    let mut w = io::BufWriter::new(std::fs::File::create(path)?);
    header(&mut w, "polygonal mesh")?;
    writeln!(w, "POINTS {} double", mesh.vertices.len())?;
    for p in &mesh.vertices {
        writeln!(w, "{} {} 0.0", p.x, p.y)?;
    }
    let total: usize = mesh.elements.iter().map(|e| e.vertices.len() + 1).sum();
    writeln!(w, "CELLS {} {}", mesh.elements.len(), total)?;
    for e in &mesh.elements {
        write!(w, "{}", e.vertices.len())?;
        for v in &e.vertices {
            write!(w, " {v}")?;
        }
        writeln!(w)?;
    }
    writeln!(w, "CELL_TYPES {}", mesh.elements.len())?;
    for _ in &mesh.elements {
        writeln!(w, "7")?; // VTK_POLYGON
    }
    writeln!(w, "CELL_DATA {}", mesh.elements.len())?;
    writeln!(w, "SCALARS subdomain int 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for e in &mesh.elements {
        writeln!(w, "{}", e.subdomain)?;
    }
    Ok(())
}

/// Write a solution: per-element duplicated vertices carrying the sampled
/// interior displacement, plus centroid values and subdomain per cell.
pub fn write_solution_vtk(
    mesh: &PolyMesh,
    space: &WgSpace,
    layout: &DofLayout,
    full: &[f64],
    path: &Path,
) -> io::Result<()> {
    let mut w = io::BufWriter::new(std::fs::File::create(path)?);
    header(&mut w, "displacement")?;
    let npts: usize = mesh.elements.iter().map(|e| e.vertices.len()).sum();
    writeln!(w, "POINTS {npts} double")?;
    for el in 0..mesh.elements.len() {
        for p in mesh.element_points(el) {
            writeln!(w, "{} {} 0.0", p.x, p.y)?;
        }
    }
    writeln!(
        w,
        "CELLS {} {}",
        mesh.elements.len(),
        npts + mesh.elements.len()
    )?;
    let mut base = 0usize;
    for e in &mesh.elements {
        write!(w, "{}", e.vertices.len())?;
        for i in 0..e.vertices.len() {
            write!(w, " {}", base + i)?;
        }
        writeln!(w)?;
        base += e.vertices.len();
    }
    writeln!(w, "CELL_TYPES {}", mesh.elements.len())?;
    for _ in &mesh.elements {
        writeln!(w, "7")?;
    }

    let nk = (space.k + 1) * (space.k + 2) / 2;
    let eval_u = |el: usize, p: crate::mesh::Point2| -> [f64; 2] {
        let basis = crate::polyquad::basis::ScaledMonomialBasis::for_element(mesh, el, space.k);
        let off = layout.elem_offset[el];
        let mut u = [0.0, 0.0];
        for j in 0..nk {
            let m = basis.eval(j, p);
            u[0] += full[off + j] * m;
            u[1] += full[off + nk + j] * m;
        }
        u
    };

    writeln!(w, "POINT_DATA {npts}")?;
    writeln!(w, "VECTORS displacement double")?;
    for el in 0..mesh.elements.len() {
        for p in mesh.element_points(el) {
            let u = eval_u(el, p);
            writeln!(w, "{} {} 0.0", u[0], u[1])?;
        }
    }
    writeln!(w, "CELL_DATA {}", mesh.elements.len())?;
    writeln!(w, "SCALARS subdomain int 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for e in &mesh.elements {
        writeln!(w, "{}", e.subdomain)?;
    }
    writeln!(w, "VECTORS centroid_displacement double")?;
    for el in 0..mesh.elements.len() {
        let u = eval_u(el, mesh.elements[el].centroid);
        writeln!(w, "{} {} 0.0", u[0], u[1])?;
    }
    Ok(())
}
