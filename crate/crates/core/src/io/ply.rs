//! ASCII PLY reader/writer for the vertex-only subset used here: float
//! properties x, y, z and optionally nx, ny, nz, in that order.

use std::io::Write;
use std::path::Path;

use nalgebra::Vector3;

use super::FileError;
use crate::geometry::{Point3, PointCloud};

pub fn read_ply(path: &Path) -> Result<PointCloud, FileError> {
    let text = std::fs::read_to_string(path).map_err(|e| FileError::io(path, e))?;
    let mut lines = text.lines().enumerate();

    let mut next_content = |expect: &str| -> Result<(usize, String), FileError> {
        for (idx, raw) in lines.by_ref() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with("comment") {
                continue;
            }
            return Ok((idx + 1, line.to_string()));
        }
        Err(FileError::parse(path, 0, format!("unexpected end of file, expected {expect}")))
    };

    let (line_no, magic) = next_content("'ply'")?;
    if magic != "ply" {
        return Err(FileError::parse(path, line_no, "missing 'ply' magic"));
    }
    let (line_no, format) = next_content("format line")?;
    if format != "format ascii 1.0" {
        if format.starts_with("format binary") {
            return Err(FileError::Unsupported {
                path: path.display().to_string(),
                message: "binary PLY is not supported".into(),
            });
        }
        return Err(FileError::parse(path, line_no, format!("unsupported format line '{format}'")));
    }

    let (line_no, element) = next_content("'element vertex N'")?;
    let vertex_count: usize = match element.split_whitespace().collect::<Vec<_>>()[..] {
        ["element", "vertex", n] => n
            .parse()
            .map_err(|_| FileError::parse(path, line_no, format!("bad vertex count '{n}'")))?,
        _ => return Err(FileError::parse(path, line_no, format!("expected 'element vertex N', got '{element}'"))),
    };

    // Properties must be float/double x y z [nx ny nz], in order.
    const EXPECTED: [&str; 6] = ["x", "y", "z", "nx", "ny", "nz"];
    let mut property_count = 0usize;
    let end_header = loop {
        let (line_no, line) = next_content("property or end_header")?;
        if line == "end_header" {
            break line_no;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields[..] {
            ["property", ty, name] if ty == "float" || ty == "double" => {
                if property_count >= EXPECTED.len() || name != EXPECTED[property_count] {
                    return Err(FileError::parse(
                        path,
                        line_no,
                        format!("unexpected property '{name}' (supported order: x y z nx ny nz)"),
                    ));
                }
                property_count += 1;
            }
            ["element", ..] => {
                return Err(FileError::parse(path, line_no, format!("unsupported element '{line}'")));
            }
            _ => {
                return Err(FileError::parse(path, line_no, format!("unsupported header line '{line}'")));
            }
        }
    };
    let has_normals = match property_count {
        3 => false,
        6 => true,
        n => {
            return Err(FileError::parse(
                path,
                end_header,
                format!("need 3 or 6 float properties, found {n}"),
            ))
        }
    };

    let mut points = Vec::with_capacity(vertex_count);
    let mut normals = Vec::with_capacity(if has_normals { vertex_count } else { 0 });
    let mut data_line = end_header;
    while points.len() < vertex_count {
        let Some((idx, raw)) = lines.next() else {
            return Err(FileError::parse(
                path,
                data_line + 1,
                format!("header declares {vertex_count} vertices but {} present", points.len()),
            ));
        };
        data_line = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let values: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse).collect();
        let values = values
            .map_err(|e| FileError::parse(path, data_line, format!("bad float: {e}")))?;
        if values.len() != property_count {
            return Err(FileError::parse(
                path,
                data_line,
                format!("expected {property_count} values, got {}", values.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FileError::parse(path, data_line, "non-finite coordinate"));
        }
        points.push(Point3::new(values[0], values[1], values[2]));
        if has_normals {
            normals.push(Vector3::new(values[3], values[4], values[5]));
        }
    }
    for (idx, raw) in lines {
        if !raw.trim().is_empty() {
            return Err(FileError::parse(path, idx + 1, "trailing content after vertex data"));
        }
    }

    let cloud = if has_normals {
        PointCloud::with_normals(points, normals)
    } else {
        PointCloud::new(points)
    };
    cloud.map_err(|e| FileError::invalid(path, e.to_string()))
}

pub fn write_ply(cloud: &PointCloud, path: &Path) -> Result<(), FileError> {
    let mut out = Vec::new();
    let normals = cloud.normals();
    writeln!(out, "ply").unwrap();
    writeln!(out, "format ascii 1.0").unwrap();
    writeln!(out, "element vertex {}", cloud.len()).unwrap();
    writeln!(out, "property float x").unwrap();
    writeln!(out, "property float y").unwrap();
    writeln!(out, "property float z").unwrap();
    if normals.is_some() {
        writeln!(out, "property float nx").unwrap();
        writeln!(out, "property float ny").unwrap();
        writeln!(out, "property float nz").unwrap();
    }
    writeln!(out, "end_header").unwrap();
    for (i, p) in cloud.points().iter().enumerate() {
        // Shortest-roundtrip float formatting: lossless and canonical.
        match normals {
            Some(ns) => {
                let n = ns[i];
                writeln!(out, "{} {} {} {} {} {}", p.x, p.y, p.z, n.x, n.y, n.z).unwrap();
            }
            None => writeln!(out, "{} {} {}", p.x, p.y, p.z).unwrap(),
        }
    }
    std::fs::write(path, out).map_err(|e| FileError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("pwr_align_ply_tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn minimal_three_vertex_file() {
        let path = tmp("minimal.ply");
        std::fs::write(
            &path,
            "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n1 0 0\n0 1 0\n",
        )
        .unwrap();
        let cloud = read_ply(&path).unwrap();
        assert_eq!(cloud.len(), 3);
        assert_eq!(cloud.point(2), Point3::new(0.0, 1.0, 0.0));
        assert!(cloud.normals().is_none());
    }

    #[test]
    fn truncated_file_reports_the_line() {
        let path = tmp("truncated.ply");
        std::fs::write(
            &path,
            "ply\nformat ascii 1.0\nelement vertex 5\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n1 0 0\n0 1 0\n1 1 0\n",
        )
        .unwrap();
        match read_ply(&path).unwrap_err() {
            FileError::Parse { line, message, .. } => {
                // Four vertices end on line 11; the missing fifth is line 12.
                assert_eq!(line, 12);
                assert!(message.contains("declares 5"), "{message}");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn binary_is_unsupported() {
        let path = tmp("binary.ply");
        std::fs::write(
            &path,
            "ply\nformat binary_little_endian 1.0\nelement vertex 0\nend_header\n",
        )
        .unwrap();
        assert!(matches!(read_ply(&path).unwrap_err(), FileError::Unsupported { .. }));
    }

    #[test]
    fn unknown_property_is_rejected() {
        let path = tmp("props.ply");
        std::fs::write(
            &path,
            "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nproperty uchar red\nend_header\n0 0 0 255\n",
        )
        .unwrap();
        assert!(matches!(read_ply(&path).unwrap_err(), FileError::Parse { line: 7, .. }));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn write_read_roundtrip_is_exact(
            raw in proptest::collection::vec((-1e6f64..1e6, -1e6f64..1e6, -1e6f64..1e6), 1..60),
            with_normals in proptest::bool::ANY,
        ) {
            let points: Vec<Point3> = raw.iter().map(|&(x, y, z)| Point3::new(x, y, z)).collect();
            let cloud = if with_normals {
                let ns = vec![nalgebra::Vector3::z(); points.len()];
                PointCloud::with_normals(points, ns).unwrap()
            } else {
                PointCloud::new(points).unwrap()
            };
            let path = tmp(&format!("roundtrip_{with_normals}.ply"));
            write_ply(&cloud, &path).unwrap();
            let back = read_ply(&path).unwrap();
            prop_assert_eq!(&back, &cloud);
            // A second write is byte-identical: the format is canonical.
            let bytes1 = std::fs::read(&path).unwrap();
            write_ply(&back, &path).unwrap();
            let bytes2 = std::fs::read(&path).unwrap();
            prop_assert_eq!(bytes1, bytes2);
        }
    }
}
