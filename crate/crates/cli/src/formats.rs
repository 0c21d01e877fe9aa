//! ASCII point cloud and mesh files: XYZ, PLY (ascii 1.0) and OBJ.
//!
//! Coordinates are written as the shortest decimal that round-trips the
//! `f32` value, so a save/load cycle is bitwise exact at `f32` precision.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use atlas_core::{Point3, PointCloud, TriMesh};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    /// One `x y z` triple per line; extra columns are ignored.
    Xyz,
    PlyAscii,
    /// The `v` lines of an OBJ file.
    ObjVertices,
}

impl CloudFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match extension(path).as_deref() {
            Some("xyz") => Ok(CloudFormat::Xyz),
            Some("ply") => Ok(CloudFormat::PlyAscii),
            Some("obj") => Ok(CloudFormat::ObjVertices),
            _ => Err(CliError::Usage(format!(
                "{}: cannot infer point cloud format (expected .xyz, .ply or .obj)",
                path.display()
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CloudFormat::Xyz => "xyz",
            CloudFormat::PlyAscii => "ply-ascii",
            CloudFormat::ObjVertices => "obj-vertices",
        }
    }
}

impl std::str::FromStr for CloudFormat {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xyz" => Ok(CloudFormat::Xyz),
            "ply-ascii" => Ok(CloudFormat::PlyAscii),
            "obj-vertices" => Ok(CloudFormat::ObjVertices),
            _ => Err(CliError::Usage(format!("unknown point cloud format '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    PlyAscii,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match extension(path).as_deref() {
            Some("obj") => Ok(MeshFormat::Obj),
            Some("ply") => Ok(MeshFormat::PlyAscii),
            _ => Err(CliError::Usage(format!(
                "{}: cannot infer mesh format (expected .obj or .ply)",
                path.display()
            ))),
        }
    }
}

fn extension(path: &Path) -> Option<String> {
    path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase())
}

/// Is this a file `load_cloud` knows how to read?
pub fn is_cloud_file(path: &Path) -> bool {
    path.is_file() && CloudFormat::from_path(path).is_ok()
}

/// Cloud files in `dir`, sorted by file name.
pub fn cloud_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if is_cloud_file(&path) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    Ok(())
}

/// Writes `contents`, creating parent directories as needed.
pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_file(path, text)
}

pub fn load_cloud(path: &Path, format: CloudFormat) -> Result<PointCloud> {
    let text = read_text(path)?;
    let points = match format {
        CloudFormat::Xyz => parse_xyz(&text, path)?,
        CloudFormat::PlyAscii => parse_ply(&text, path)?.0,
        CloudFormat::ObjVertices => parse_obj(&text, path)?.0,
    };
    Ok(PointCloud::new(points)?)
}

/// Loads a cloud, picking the format from the file extension.
pub fn load_cloud_auto(path: &Path) -> Result<PointCloud> {
    load_cloud(path, CloudFormat::from_path(path)?)
}

pub fn save_cloud(cloud: &PointCloud, path: &Path, format: CloudFormat) -> Result<()> {
    let text = match format {
        CloudFormat::Xyz => {
            let mut out = String::new();
            for &p in cloud.points() {
                push_coords(&mut out, "", p);
            }
            out
        }
        CloudFormat::PlyAscii => ply_text(cloud.points(), &[]),
        CloudFormat::ObjVertices => obj_text(cloud.points(), &[]),
    };
    write_text(path, &text)
}

pub fn load_mesh(path: &Path, format: MeshFormat) -> Result<TriMesh> {
    let text = read_text(path)?;
    let (vertices, faces) = match format {
        MeshFormat::Obj => parse_obj(&text, path)?,
        MeshFormat::PlyAscii => parse_ply(&text, path)?,
    };
    Ok(TriMesh::new(vertices, faces)?)
}

pub fn load_mesh_auto(path: &Path) -> Result<TriMesh> {
    load_mesh(path, MeshFormat::from_path(path)?)
}

pub fn save_mesh(mesh: &TriMesh, path: &Path, format: MeshFormat) -> Result<()> {
    let text = match format {
        MeshFormat::Obj => obj_text(mesh.vertices(), mesh.faces()),
        MeshFormat::PlyAscii => ply_text(mesh.vertices(), mesh.faces()),
    };
    write_text(path, &text)
}

pub fn save_mesh_auto(mesh: &TriMesh, path: &Path) -> Result<()> {
    save_mesh(mesh, path, MeshFormat::from_path(path)?)
}

fn push_coords(out: &mut String, prefix: &str, p: Point3) {
    let _ = writeln!(out, "{prefix}{} {} {}", p.x as f32, p.y as f32, p.z as f32);
}

fn obj_text(vertices: &[Point3], faces: &[[usize; 3]]) -> String {
    let mut out = String::new();
    for &p in vertices {
        push_coords(&mut out, "v ", p);
    }
    for f in faces {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out
}

fn ply_text(vertices: &[Point3], faces: &[[usize; 3]]) -> String {
    let mut out = String::from("ply\nformat ascii 1.0\n");
    let _ = writeln!(out, "element vertex {}", vertices.len());
    out.push_str("property float x\nproperty float y\nproperty float z\n");
    if !faces.is_empty() {
        let _ = writeln!(out, "element face {}", faces.len());
        out.push_str("property list uchar int vertex_indices\n");
    }
    out.push_str("end_header\n");
    for &p in vertices {
        push_coords(&mut out, "", p);
    }
    for f in faces {
        let _ = writeln!(out, "3 {} {} {}", f[0], f[1], f[2]);
    }
    out
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> CliError {
    CliError::Parse { path: path.to_path_buf(), line, message: message.into() }
}

fn parse_number<T: std::str::FromStr>(token: &str, path: &Path, line: usize) -> Result<T> {
    token.parse().map_err(|_| parse_error(path, line, format!("'{token}' is not a number")))
}

fn parse_point<'a>(
    mut tokens: impl Iterator<Item = &'a str>,
    path: &Path,
    line: usize,
) -> Result<Point3> {
    let mut c = [0.0; 3];
    for v in &mut c {
        let token =
            tokens.next().ok_or_else(|| parse_error(path, line, "expected three coordinates"))?;
        *v = parse_number::<f64>(token, path, line)?;
        if !v.is_finite() {
            return Err(parse_error(path, line, format!("non-finite coordinate '{token}'")));
        }
    }
    Ok(Point3::from_array(c))
}

/// Parses XYZ text. Blank lines and `#` comments are skipped.
pub fn parse_xyz(text: &str, path: &Path) -> Result<Vec<Point3>> {
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        points.push(parse_point(line.split_whitespace(), path, i + 1)?);
    }
    Ok(points)
}

/// Parses OBJ vertices and faces. Polygons are fan-triangulated; negative
/// indices count back from the most recent vertex; statements other than
/// `v` and `f` are ignored.
pub fn parse_obj(text: &str, path: &Path) -> Result<(Vec<Point3>, Vec<[usize; 3]>)> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => vertices.push(parse_point(tokens, path, n)?),
            Some("f") => {
                let mut corners = Vec::new();
                for token in tokens {
                    let index = token.split('/').next().unwrap_or("");
                    let k: i64 = parse_number(index, path, n)?;
                    let resolved = if k > 0 {
                        k - 1
                    } else if k < 0 {
                        vertices.len() as i64 + k
                    } else {
                        return Err(parse_error(path, n, "face index 0 is not valid in OBJ"));
                    };
                    if resolved < 0 || resolved >= vertices.len() as i64 {
                        return Err(parse_error(path, n, format!("face index {k} out of range")));
                    }
                    corners.push(resolved as usize);
                }
                if corners.len() < 3 {
                    return Err(parse_error(path, n, "face needs at least three vertices"));
                }
                for j in 1..corners.len() - 1 {
                    faces.push([corners[0], corners[j], corners[j + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok((vertices, faces))
}

/// Parses an ascii PLY file with a `vertex` element (x, y, z properties in
/// any position) and an optional `face` element of index lists.
pub fn parse_ply(text: &str, path: &Path) -> Result<(Vec<Point3>, Vec<[usize; 3]>)> {
    struct Element {
        name: String,
        count: usize,
        properties: Vec<String>,
    }

    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(parse_error(path, 1, "missing 'ply' magic line")),
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut header_done = false;
    for (i, line) in lines.by_ref() {
        let n = i + 1;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["format", "ascii", _] => {}
            ["format", other, ..] => {
                return Err(parse_error(path, n, format!("unsupported PLY format '{other}'")))
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: parse_number(count, path, n)?,
                properties: Vec::new(),
            }),
            ["property", .., name] => match elements.last_mut() {
                Some(e) => e.properties.push(name.to_string()),
                None => return Err(parse_error(path, n, "property before any element")),
            },
            ["end_header"] => {
                header_done = true;
                break;
            }
            _ => return Err(parse_error(path, n, format!("unexpected header line '{line}'"))),
        }
    }
    if !header_done {
        return Err(parse_error(path, text.lines().count(), "missing end_header"));
    }

    let mut body = lines.filter(|(_, l)| !l.trim().is_empty());
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for element in &elements {
        for _ in 0..element.count {
            let Some((i, line)) = body.next() else {
                return Err(parse_error(
                    path,
                    text.lines().count(),
                    format!("file ends before all {} '{}' rows", element.count, element.name),
                ));
            };
            let n = i + 1;
            let tokens: Vec<&str> = line.split_whitespace().collect();
            match element.name.as_str() {
                "vertex" => {
                    let mut c = [0.0; 3];
                    for (axis, name) in ["x", "y", "z"].iter().enumerate() {
                        let col = element
                            .properties
                            .iter()
                            .position(|p| p == name)
                            .ok_or_else(|| parse_error(path, n, format!("vertex has no '{name}'")))?;
                        let token = tokens
                            .get(col)
                            .ok_or_else(|| parse_error(path, n, "too few vertex columns"))?;
                        c[axis] = parse_number(token, path, n)?;
                    }
                    vertices.push(Point3::from_array(c));
                }
                "face" => {
                    let count: usize = parse_number(
                        tokens.first().ok_or_else(|| parse_error(path, n, "empty face row"))?,
                        path,
                        n,
                    )?;
                    if count < 3 || tokens.len() < count + 1 {
                        return Err(parse_error(path, n, "malformed face row"));
                    }
                    let corners = tokens[1..=count]
                        .iter()
                        .map(|t| parse_number::<usize>(t, path, n))
                        .collect::<Result<Vec<_>>>()?;
                    for j in 1..count - 1 {
                        faces.push([corners[0], corners[j], corners[j + 1]]);
                    }
                }
                _ => {}
            }
        }
    }
    Ok((vertices, faces))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("test")
    }

    #[test]
    fn xyz_two_points() {
        let pts = parse_xyz("0 0 0\n1 0 0", p()).unwrap();
        assert_eq!(pts, vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)]);
    }

    #[test]
    fn xyz_error_names_line() {
        let err = parse_xyz("0 0 0\n1 1 1\n2 x 2\n", p()).unwrap_err();
        match err {
            CliError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_xyz("1 2\n", p()).is_err());
    }

    #[test]
    fn obj_fan_and_negative_indices() {
        let text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\nf -4/1 -3 -2\nvn 0 0 1\n";
        let (v, f) = parse_obj(text, p()).unwrap();
        assert_eq!(v.len(), 4);
        assert_eq!(f, vec![[0, 1, 2], [0, 2, 3], [0, 1, 2]]);
        assert!(parse_obj("v 0 0 0\nf 1 2 3\n", p()).is_err());
        assert!(parse_obj("v 0 0 0\nf 0 1 1\n", p()).is_err());
    }

    #[test]
    fn ply_property_order() {
        let text = "ply\nformat ascii 1.0\nelement vertex 2\nproperty float z\nproperty float x\n\
                    property float y\nelement face 1\nproperty list uchar int vertex_indices\n\
                    end_header\n3 1 2\n6 4 5\n3 0 1 1\n";
        let (v, f) = parse_ply(text, p()).unwrap();
        assert_eq!(v, vec![Point3::new(1.0, 2.0, 3.0), Point3::new(4.0, 5.0, 6.0)]);
        assert_eq!(f, vec![[0, 1, 1]]);
    }

    #[test]
    fn ply_rejects_binary_and_short_files() {
        let binary = "ply\nformat binary_little_endian 1.0\nend_header\n";
        assert!(matches!(parse_ply(binary, p()), Err(CliError::Parse { line: 2, .. })));
        let short = "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\n\
                     property float z\nend_header\n0 0 0\n";
        assert!(parse_ply(short, p()).is_err());
    }

    #[test]
    fn obj_text_is_one_based() {
        let v = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)];
        let text = obj_text(&v, &[[0, 1, 2]]);
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 3);
        assert_eq!(text.lines().last(), Some("f 1 2 3"));
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(CloudFormat::from_path(Path::new("a/b.XYZ")).unwrap(), CloudFormat::Xyz);
        assert_eq!(MeshFormat::from_path(Path::new("m.ply")).unwrap(), MeshFormat::PlyAscii);
        assert!(MeshFormat::from_path(Path::new("m.xyz")).is_err());
        assert_eq!("obj-vertices".parse::<CloudFormat>().unwrap(), CloudFormat::ObjVertices);
    }
}
