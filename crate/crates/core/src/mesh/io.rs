use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{BoundaryLabel, CellKind, SimplicialMesh, Vec3};
use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Obj,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref() {
            Some("off") => Ok(MeshFormat::Off),
            Some("obj") => Ok(MeshFormat::Obj),
            _ => Err(LabError::Unsupported(format!("cannot infer mesh format of {}", path.display()))),
        }
    }
}

fn labels_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".labels.json");
    PathBuf::from(s)
}

fn parse_err(line: usize, message: impl Into<String>) -> LabError {
    LabError::Parse { line, message: message.into() }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| parse_err(line, format!("bad number {tok:?}")))
}

struct Raw {
    vertices: Vec<Vec3>,
    segments: Vec<[usize; 2]>,
    triangles: Vec<[usize; 3]>,
}

fn parse_off(text: &str) -> Result<Raw> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (ln, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let mut counts_line = None;
    if header == "OFF" {
    } else if let Some(rest) = header.strip_prefix("OFF") {
        counts_line = Some((ln, rest.trim()));
    } else {
        return Err(parse_err(ln, "missing OFF header"));
    }
    let (cl, counts) = match counts_line {
        Some(c) if !c.1.is_empty() => c,
        _ => lines.next().ok_or_else(|| parse_err(ln, "missing element counts"))?,
    };
    let nums: Vec<&str> = counts.split_whitespace().collect();
    if nums.len() < 2 {
        return Err(parse_err(cl, "expected vertex and face counts"));
    }
    let nv: usize = nums[0].parse().map_err(|_| parse_err(cl, "bad vertex count"))?;
    let nf: usize = nums[1].parse().map_err(|_| parse_err(cl, "bad face count"))?;
    let mut raw = Raw { vertices: Vec::with_capacity(nv), segments: Vec::new(), triangles: Vec::new() };
    for _ in 0..nv {
        let (l, s) = lines.next().ok_or_else(|| parse_err(cl, "unexpected end of file in vertex list"))?;
        let toks: Vec<&str> = s.split_whitespace().collect();
        if toks.len() < 3 {
            return Err(parse_err(l, "vertex needs three coordinates"));
        }
        raw.vertices.push(Vec3::new(parse_f64(toks[0], l)?, parse_f64(toks[1], l)?, parse_f64(toks[2], l)?));
    }
    for _ in 0..nf {
        let (l, s) = lines.next().ok_or_else(|| parse_err(cl, "unexpected end of file in face list"))?;
        let toks: Vec<&str> = s.split_whitespace().collect();
        let k: usize = toks.first().and_then(|t| t.parse().ok()).ok_or_else(|| parse_err(l, "bad face size"))?;
        if toks.len() < k + 1 {
            return Err(parse_err(l, "face has fewer indices than declared"));
        }
        let idx: Vec<usize> = toks[1..=k]
            .iter()
            .map(|t| t.parse::<usize>().map_err(|_| parse_err(l, format!("bad index {t:?}"))))
            .collect::<Result<_>>()?;
        if idx.iter().any(|&i| i >= nv) {
            return Err(parse_err(l, "vertex index out of range"));
        }
        match k {
            2 => raw.segments.push([idx[0], idx[1]]),
            3 => raw.triangles.push([idx[0], idx[1], idx[2]]),
            _ => return Err(parse_err(l, format!("unsupported {k}-vertex face; only segments and triangles"))),
        }
    }
    Ok(raw)
}

fn parse_obj(text: &str) -> Result<Raw> {
    let mut raw = Raw { vertices: Vec::new(), segments: Vec::new(), triangles: Vec::new() };
    let mut pending: Vec<(usize, Vec<i64>, bool)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let l = i + 1;
        let s = line.split('#').next().unwrap_or("").trim();
        let mut toks = s.split_whitespace();
        match toks.next() {
            Some("v") => {
                let c: Vec<f64> = toks.map(|t| parse_f64(t, l)).collect::<Result<_>>()?;
                if c.len() < 3 {
                    return Err(parse_err(l, "vertex needs three coordinates"));
                }
                raw.vertices.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some(tag @ ("f" | "l")) => {
                let idx: Vec<i64> = toks
                    .map(|t| {
                        let first = t.split('/').next().unwrap_or("");
                        first.parse::<i64>().map_err(|_| parse_err(l, format!("bad index {t:?}")))
                    })
                    .collect::<Result<_>>()?;
                pending.push((l, idx, tag == "f"));
            }
            _ => {}
        }
    }
    let nv = raw.vertices.len() as i64;
    for (l, idx, is_face) in pending {
        let resolved: Vec<usize> = idx
            .iter()
            .map(|&k| {
                let z = if k > 0 { k - 1 } else { nv + k };
                if k == 0 || z < 0 || z >= nv {
                    Err(parse_err(l, format!("vertex index {k} out of range")))
                } else {
                    Ok(z as usize)
                }
            })
            .collect::<Result<_>>()?;
        if is_face {
            if resolved.len() != 3 {
                return Err(parse_err(l, format!("unsupported {}-vertex face; only triangles", resolved.len())));
            }
            raw.triangles.push([resolved[0], resolved[1], resolved[2]]);
        } else {
            if resolved.len() < 2 {
                return Err(parse_err(l, "line element needs two vertices"));
            }
            for w in resolved.windows(2) {
                raw.segments.push([w[0], w[1]]);
            }
        }
    }
    Ok(raw)
}

fn load_labels(path: &Path) -> Result<BTreeMap<usize, BoundaryLabel>> {
    let lp = labels_path(path);
    if !lp.exists() {
        return Ok(BTreeMap::new());
    }
    let text = std::fs::read_to_string(&lp)?;
    serde_json::from_str(&text).map_err(|e| parse_err(e.line(), format!("labels file {}: {e}", lp.display())))
}

/// Loads a mesh; planar domains pick up `<path>.labels.json` when present.
pub fn load_mesh(path: &Path) -> Result<SimplicialMesh> {
    let format = MeshFormat::from_path(path)?;
    let text = std::fs::read_to_string(path)?;
    let raw = match format {
        MeshFormat::Off => parse_off(&text)?,
        MeshFormat::Obj => parse_obj(&text)?,
    };
    match (raw.triangles.is_empty(), raw.segments.is_empty()) {
        (true, true) => Err(LabError::InvalidTopology("file contains no cells".into())),
        (false, false) => Err(LabError::InvalidTopology("mixed segment and triangle cells".into())),
        (true, false) => SimplicialMesh::curve(raw.vertices, raw.segments),
        (false, true) => {
            if raw.vertices.iter().all(|v| v.z == 0.0) {
                let labels = load_labels(path)?;
                SimplicialMesh::planar_domain(raw.vertices, raw.triangles, labels)
            } else {
                SimplicialMesh::surface(raw.vertices, raw.triangles)
            }
        }
    }
}

/// Writes a mesh; planar domains also write their labels sidecar.
pub fn save_mesh(mesh: &SimplicialMesh, path: &Path) -> Result<()> {
    let format = MeshFormat::from_path(path)?;
    let cells = mesh.cells();
    let mut out = String::new();
    match format {
        MeshFormat::Off => {
            out.push_str("OFF\n");
            let _ = writeln!(out, "{} {} 0", mesh.vertex_count(), cells.len());
            for v in mesh.vertices() {
                let _ = writeln!(out, "{:?} {:?} {:?}", v.x, v.y, v.z);
            }
            for c in &cells {
                let idx: Vec<String> = c.iter().map(|i| i.to_string()).collect();
                let _ = writeln!(out, "{} {}", c.len(), idx.join(" "));
            }
        }
        MeshFormat::Obj => {
            for v in mesh.vertices() {
                let _ = writeln!(out, "v {:?} {:?} {:?}", v.x, v.y, v.z);
            }
            let tag = if mesh.kind() == CellKind::Curve { "l" } else { "f" };
            for c in &cells {
                let idx: Vec<String> = c.iter().map(|i| (i + 1).to_string()).collect();
                let _ = writeln!(out, "{tag} {}", idx.join(" "));
            }
        }
    }
    std::fs::write(path, out)?;
    if mesh.kind() == CellKind::PlanarDomain {
        let json = serde_json::to_string_pretty(mesh.vertex_labels()).map_err(|e| LabError::Io(e.to_string()))?;
        std::fs::write(labels_path(path), json)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{gen_circle, gen_icosphere, gen_wedge};

    #[test]
    fn round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let meshes = [
            gen_icosphere(1.5, 1).unwrap(),
            gen_circle(1.0, 12).unwrap(),
            gen_wedge(1.0, std::f64::consts::FRAC_PI_2, 4).unwrap(),
        ];
        for (k, m) in meshes.iter().enumerate() {
            for ext in ["off", "obj"] {
                let p = dir.path().join(format!("m{k}.{ext}"));
                save_mesh(m, &p).unwrap();
                let back = load_mesh(&p).unwrap();
                assert_eq!(&back, m, "{ext} round trip of mesh {k}");
            }
        }
    }

    #[test]
    fn rejects_quads_and_garbage() {
        let quad = "OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n";
        assert!(matches!(parse_off(quad), Err(LabError::Parse { line: 7, .. })));
        assert!(matches!(parse_off("OFF\n1 0 0\n0 zero 0\n"), Err(LabError::Parse { line: 3, .. })));
        assert!(parse_off("PLY\n").is_err());
        let obj_quad = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
        assert!(matches!(parse_obj(obj_quad), Err(LabError::Parse { line: 5, .. })));
    }

    #[test]
    fn obj_slash_syntax_and_negative_indices() {
        let obj = "v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nf 1/1/1 2//1 -1\n";
        let raw = parse_obj(obj).unwrap();
        assert_eq!(raw.triangles, vec![[0, 1, 2]]);
    }

    #[test]
    fn open_surface_is_topology_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("open.off");
        std::fs::write(&p, "OFF\n4 2 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 2 1\n3 0 1 3\n").unwrap();
        assert!(matches!(load_mesh(&p), Err(LabError::InvalidTopology(_))));
    }
}
