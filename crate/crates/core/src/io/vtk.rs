//! Legacy ASCII VTK snapshots on the reference configuration.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::timeloop::State;

/// Cell fields averaged over quadrature points.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DerivedFields {
    pub phase: Vec<f64>,
    pub det_f: Vec<f64>,
}

/// Renders the snapshot: quads (type 9) with displacement and temperature at
/// the points and phase indicator and `det F` on the cells.
pub fn vtk_snapshot(mesh: &Mesh, state: &State, fields: &DerivedFields) -> Result<String> {
    let (nn, ne) = (mesh.num_nodes(), mesh.num_elements());
    if state.y.len() != 2 * nn || state.theta.len() != nn || fields.phase.len() != ne || fields.det_f.len() != ne {
        return Err(Error::InvalidDimensions(format!(
            "snapshot fields do not match {nn} nodes / {ne} cells (y {}, theta {}, phase {}, det {})",
            state.y.len(),
            state.theta.len(),
            fields.phase.len(),
            fields.det_f.len()
        )));
    }
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "kvtherm snapshot t={:.16e}", state.time);
    let _ = writeln!(s, "ASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {nn} double");
    for p in &mesh.nodes {
        let _ = writeln!(s, "{:.16e} {:.16e} 0", p[0], p[1]);
    }
    let _ = writeln!(s, "CELLS {ne} {}", 5 * ne);
    for el in &mesh.elements {
        let _ = writeln!(s, "4 {} {} {} {}", el[0], el[1], el[2], el[3]);
    }
    let _ = writeln!(s, "CELL_TYPES {ne}");
    for _ in 0..ne {
        let _ = writeln!(s, "9");
    }
    let _ = writeln!(s, "POINT_DATA {nn}");
    let _ = writeln!(s, "VECTORS displacement double");
    for (n, p) in mesh.nodes.iter().enumerate() {
        let _ = writeln!(s, "{:.16e} {:.16e} 0", state.y[2 * n] - p[0], state.y[2 * n + 1] - p[1]);
    }
    let _ = writeln!(s, "SCALARS temperature double 1\nLOOKUP_TABLE default");
    for t in &state.theta {
        let _ = writeln!(s, "{t:.16e}");
    }
    let _ = writeln!(s, "CELL_DATA {ne}");
    for (name, values) in [("phase_indicator", &fields.phase), ("det_F", &fields.det_f)] {
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for v in values.iter() {
            let _ = writeln!(s, "{v:.16e}");
        }
    }
    Ok(s)
}

pub fn write_vtk_snapshot(mesh: &Mesh, state: &State, fields: &DerivedFields, path: &Path) -> Result<()> {
    std::fs::write(path, vtk_snapshot(mesh, state, fields)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_element_layout() {
        let mesh = Mesh::gen_rectangle(1.0, 1.0, 1, 1).unwrap();
        let state = State { y: mesh.nodes.iter().flat_map(|p| *p).collect(), theta: vec![293.0; 4], time: 0.0 };
        let fields = DerivedFields { phase: vec![0.5], det_f: vec![1.0] };
        let text = vtk_snapshot(&mesh, &state, &fields).unwrap();
        assert!(text.starts_with("# vtk DataFile Version 3.0\n"));
        assert!(text.contains("POINTS 4 double\n"));
        assert!(text.contains("CELLS 1 5\n"));
        assert!(text.contains("CELL_TYPES 1\n9\n"));
        let temps: Vec<&str> = text.lines().skip_while(|l| !l.starts_with("SCALARS temperature")).skip(2).take(4).collect();
        assert!(temps.iter().all(|l| l.parse::<f64>().unwrap() == 293.0));
    }

    #[test]
    fn mismatched_fields_rejected() {
        let mesh = Mesh::gen_rectangle(1.0, 1.0, 1, 1).unwrap();
        let state = State { y: vec![0.0; 8], theta: vec![293.0; 3], time: 0.0 };
        assert!(matches!(vtk_snapshot(&mesh, &state, &DerivedFields::default()), Err(Error::InvalidDimensions(_))));
    }
}
