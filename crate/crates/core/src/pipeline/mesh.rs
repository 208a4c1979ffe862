//! Wavefront OBJ output of cones, traces and surface grids, and reading
//! OBJ vertices with normals back as oriented samples.

use std::fmt::Write as _;

use nalgebra::{Rotation3, Unit, Vector3};

use super::source::SurfaceSource;
use super::PipelineError;
use crate::classify::GridSpec;
use crate::isomap::{inverse_stereographic, isotropic_to_contact_point, SurfaceSample};
use crate::jets::JetSource;
use crate::reconstruct::{ConeSpec, CurveTrace};

pub const FRUSTUM_SEGMENTS: usize = 64;

/// Accumulates OBJ records with running vertex and normal counters.
#[derive(Debug, Default, Clone)]
pub struct ObjWriter {
    body: String,
    vertices: usize,
    normals: usize,
}

impl ObjWriter {
    pub fn new() -> Self {
        Self::default()
    }

    fn vertex(&mut self, p: &Vector3<f64>) -> usize {
        let _ = writeln!(self.body, "v {} {} {}", p.x, p.y, p.z);
        self.vertices += 1;
        self.vertices
    }

    fn normal(&mut self, n: &Vector3<f64>) -> usize {
        let _ = writeln!(self.body, "vn {} {} {}", n.x, n.y, n.z);
        self.normals += 1;
        self.normals
    }

    pub fn object(&mut self, name: &str) {
        let _ = writeln!(self.body, "o {name}");
    }

    /// The part of the cone between `span[0]` and `span[1]` times the
    /// vertex-to-contact distance, as a ring of quads. Normals are the
    /// contact normal carried around the axis.
    pub fn add_frustum(&mut self, cone: &ConeSpec, span: [f64; 2], segments: usize) {
        let axis = Unit::new_normalize(cone.axis);
        let d = cone.contact - cone.vertex;
        let mut ids = Vec::with_capacity(segments);
        for k in 0..segments {
            let rot = Rotation3::from_axis_angle(&axis, std::f64::consts::TAU * k as f64 / segments as f64);
            let n = self.normal(&(rot * cone.normal));
            let a = self.vertex(&(cone.vertex + rot * d * span[0]));
            let b = self.vertex(&(cone.vertex + rot * d * span[1]));
            ids.push((a, b, n));
        }
        for k in 0..segments {
            let (a0, b0, n0) = ids[k];
            let (a1, b1, n1) = ids[(k + 1) % segments];
            let _ = writeln!(self.body, "f {a0}//{n0} {a1}//{n1} {b1}//{n1} {b0}//{n0}");
        }
    }

    pub fn add_polyline(&mut self, pts: &[Vector3<f64>]) {
        let ids: Vec<String> = pts.iter().map(|p| self.vertex(p).to_string()).collect();
        if ids.len() >= 2 {
            let _ = writeln!(self.body, "l {}", ids.join(" "));
        }
    }

    /// Row-major `rows × cols` grid; `None` entries leave holes.
    pub fn add_quad_grid(&mut self, rows: usize, cols: usize, pts: &[Option<(Vector3<f64>, Vector3<f64>)>]) {
        let ids: Vec<Option<(usize, usize)>> = pts
            .iter()
            .map(|p| p.map(|(r, n)| (self.vertex(&r), self.normal(&n))))
            .collect();
        for i in 0..rows.saturating_sub(1) {
            for j in 0..cols.saturating_sub(1) {
                let q = [ids[i * cols + j], ids[i * cols + j + 1], ids[(i + 1) * cols + j + 1], ids[(i + 1) * cols + j]];
                if q.iter().all(Option::is_some) {
                    let refs: Vec<String> = q.iter().flatten().map(|(v, n)| format!("{v}//{n}")).collect();
                    let _ = writeln!(self.body, "f {}", refs.join(" "));
                }
            }
        }
    }

    pub fn finish(self) -> String {
        self.body
    }
}

/// Design-space points of an isotropic trace.
pub fn trace_to_design(trace: &CurveTrace, jets: &dyn JetSource) -> Result<Vec<Vector3<f64>>, PipelineError> {
    trace
        .points
        .iter()
        .map(|p| {
            let j = jets.jet_at(p[0], p[1]).map_err(|e| PipelineError::Domain(e.to_string()))?;
            Ok(isotropic_to_contact_point(p[0], p[1], &j))
        })
        .collect()
}

/// Contact points and normals of a surface on a grid: the `Rect` grid for
/// an isotropic graph, the chart grid for a parametric source.
pub fn surface_grid(
    source: &SurfaceSource,
    grid: &GridSpec,
) -> Result<(usize, usize, Vec<Option<(Vector3<f64>, Vector3<f64>)>>), PipelineError> {
    match source {
        SurfaceSource::IsotropicExpr { f } => {
            let GridSpec::Rect { nx, ny, .. } = *grid else {
                return Err(PipelineError::Config("surface export needs a rectangular grid".into()));
            };
            let ast = crate::jets::parse_expression(f).map_err(|e| PipelineError::Parse(e.to_string()))?;
            let pts = grid
                .nodes()
                .into_iter()
                .map(|(x, y)| {
                    ast.jet_at(x, y)
                        .ok()
                        .map(|j| (isotropic_to_contact_point(x, y, &j), inverse_stereographic(x, y)))
                })
                .collect();
            Ok((ny, nx, pts))
        }
        SurfaceSource::Parametric { x, y, z, orientation, grid: pg } => {
            let s = super::source::sample_parametric(x, y, z, *orientation, pg)?;
            let mut it = s.params.iter().zip(&s.samples).peekable();
            let pts = pg
                .nodes()
                .into_iter()
                .map(|node| match it.peek() {
                    Some((p, smp)) if **p == node => {
                        let out = Some((smp.r, smp.n));
                        it.next();
                        out
                    }
                    _ => None,
                })
                .collect();
            Ok((pg.nt, pg.ns, pts))
        }
        SurfaceSource::Cloud { .. } => Err(PipelineError::Config("a point cloud has no grid to export".into())),
    }
}

fn parse_floats(rest: &[&str], line: usize) -> Result<Vector3<f64>, PipelineError> {
    if rest.len() < 3 {
        return Err(PipelineError::Input(format!("OBJ line {line}: expected three coordinates")));
    }
    let mut v = [0.0; 3];
    for (k, s) in rest.iter().take(3).enumerate() {
        v[k] = s
            .parse()
            .map_err(|_| PipelineError::Input(format!("OBJ line {line}: bad number `{s}`")))?;
    }
    Ok(Vector3::new(v[0], v[1], v[2]))
}

/// Vertices paired with the normals their faces reference. Without faces,
/// vertices and normals are paired by position when their counts match.
pub fn import_obj(text: &str) -> Result<Vec<SurfaceSample>, PipelineError> {
    let mut vs = Vec::new();
    let mut ns = Vec::new();
    let mut pairing: Vec<Option<usize>> = Vec::new();
    let mut any_face = false;
    for (i, raw) in text.lines().enumerate() {
        let mut parts = raw.split_whitespace();
        let Some(tag) = parts.next() else { continue };
        let rest: Vec<&str> = parts.collect();
        match tag {
            "v" => {
                vs.push(parse_floats(&rest, i + 1)?);
                pairing.push(None);
            }
            "vn" => ns.push(parse_floats(&rest, i + 1)?),
            "f" => {
                any_face = true;
                for r in rest {
                    let mut it = r.split('/');
                    let v: Option<isize> = it.next().and_then(|s| s.parse().ok());
                    let n: Option<isize> = it.nth(1).and_then(|s| s.parse().ok());
                    let resolve = |k: isize, len: usize| {
                        if k > 0 {
                            Some(k as usize - 1)
                        } else if k < 0 && (-k) as usize <= len {
                            Some(len - (-k) as usize)
                        } else {
                            None
                        }
                    };
                    if let (Some(v), Some(n)) = (v, n) {
                        match (resolve(v, vs.len()), resolve(n, ns.len())) {
                            (Some(v), Some(n)) if v < vs.len() && n < ns.len() => pairing[v] = Some(n),
                            _ => return Err(PipelineError::Input(format!("OBJ line {}: bad face index", i + 1))),
                        }
                    }
                }
            }
            _ => {}
        }
    }
    if !any_face && vs.len() == ns.len() {
        pairing = (0..vs.len()).map(Some).collect();
    }
    Ok(vs
        .iter()
        .zip(&pairing)
        .filter_map(|(r, n)| n.map(|k| SurfaceSample { r: *r, n: ns[k].normalize() }))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::ToolParams;
    use crate::jets::{jet_of_expression, parse_expression};
    use crate::reconstruct::{build_cone_at, ToolBounds};

    fn generator_cone(a: f64) -> ConeSpec {
        let ast = parse_expression("y^2/(x^2+y^2)").unwrap();
        let s3 = 3f64.sqrt();
        let (x, y) = (s3 * a.cos(), s3 * a.sin());
        let j = jet_of_expression(&ast, x, y).unwrap();
        let b = build_cone_at(x, y, &j, &ToolParams::cone(30f64.to_radians()), &ToolBounds { r_min: 0.0, r_max: 1e9 }).unwrap();
        b.cones[0].clone()
    }

    #[test]
    fn frustum_records() {
        let c = generator_cone(0.4);
        let mut w = ObjWriter::new();
        w.object("cone");
        w.add_frustum(&c, [0.8, 1.2], FRUSTUM_SEGMENTS);
        let text = w.finish();
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 128);
        assert_eq!(text.lines().filter(|l| l.starts_with("vn ")).count(), 64);
        assert_eq!(text.lines().filter(|l| l.starts_with("f ")).count(), 64);
        let back = import_obj(&text).unwrap();
        assert_eq!(back.len(), 128);
        for s in &back {
            // every vertex lies on the cone with a normal orthogonal to its ruling
            let d = s.r - c.vertex;
            let ang = (c.axis.dot(&d) / d.norm()).acos();
            assert!((ang - c.theta).abs() < 1e-9);
            assert!(s.n.dot(&d).abs() < 1e-9 * d.norm());
        }
    }

    #[test]
    fn polyline_and_grid() {
        let mut w = ObjWriter::new();
        w.add_polyline(&[Vector3::zeros(), Vector3::x(), Vector3::y()]);
        let src = SurfaceSource::isotropic("0.5*(x^2+y^2)+0.5");
        let (rows, cols, pts) = surface_grid(&src, &GridSpec::Rect { x: [-0.5, 0.5], y: [-0.5, 0.5], nx: 4, ny: 3 }).unwrap();
        w.add_quad_grid(rows, cols, &pts);
        let text = w.finish();
        assert!(text.contains("l 1 2 3"));
        assert_eq!(text.lines().filter(|l| l.starts_with("f ")).count(), 6);
        // unit sphere graph: contact points on the sphere opposite the normals
        for s in import_obj(&text).unwrap() {
            assert!((s.r + s.n).norm() < 1e-12);
        }
    }

    #[test]
    fn import_rejects_bad_faces() {
        assert!(import_obj("v 0 0 0\nvn 0 0 1\nf 1//5\n").is_err());
        let s = import_obj("v 0 0 0\nv 1 0 0\nvn 0 0 2\nvn 0 1 0\n").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].n, Vector3::z());
    }
}
