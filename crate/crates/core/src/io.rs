//! File formats for every artifact of the pipeline.
//!
//! * Fixation logs: CSV with header `timestamp,col,row,duration,observer_id`.
//! * Coordinate maps: 16-bit RGBA PNG (`<prefix>.png`, or `<prefix>_NNNN.png`
//!   for frame sequences) plus a shared `<prefix>.scale.json` sidecar.
//! * Meshes and fixation clouds: ASCII PLY.
//! * Voxel grids: little-endian binary with a 16-byte header.
//! * Region labels: one integer per line, `#` starts a comment.
//! * Reports: pretty-printed JSON with sorted keys.
//!
//! Writes go to a temporary file in the target directory and are renamed into
//! place on success.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::coordmap::{CoordinateMap, ScaleSpec};
use crate::error::{Error, Result};
use crate::geometry::{Point3, SurfaceMesh};
use crate::projection::{FixationCloud3D, FixationRecord, Provenance};
use crate::saliency::VoxelGrid;

/// Writes `bytes` to `path` via a sibling temporary file and a rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut builder = tempfile::Builder::new();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        builder.permissions(fs::Permissions::from_mode(0o644));
    }
    let mut tmp = builder.tempfile_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// `<prefix>.scale.json`
pub fn sidecar_path(prefix: &Path) -> PathBuf {
    with_suffix(prefix, ".scale.json")
}

/// `<prefix>_NNNN.png`
pub fn frame_path(prefix: &Path, frame: u32) -> PathBuf {
    with_suffix(prefix, &format!("_{frame:04}.png"))
}

// ---------------------------------------------------------------------------
// Fixation logs

const FIXATION_COLUMNS: [&str; 5] = ["timestamp", "col", "row", "duration", "observer_id"];

/// Reads a fixation log. Line numbers in errors count the header as line 1.
pub fn read_fixations(path: &Path) -> Result<Vec<FixationRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .clone();
    let mut columns = [0usize; 5];
    for (slot, name) in columns.iter_mut().zip(FIXATION_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::parse(path, 1, format!("missing column `{name}`")))?;
    }

    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| rec.get(columns[i]).unwrap_or("");
        let number = |i: usize| -> Result<f64> {
            let s = field(i);
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(path, line, format!("malformed {} `{s}`", FIXATION_COLUMNS[i])))
        };
        let timestamp = number(0)?;
        if timestamp < 0.0 {
            return Err(Error::parse(path, line, "negative timestamp"));
        }
        let col = number(1)?;
        let row = number(2)?;
        let duration = if field(3).is_empty() {
            None
        } else {
            let d = number(3)?;
            if d < 0.0 {
                return Err(Error::parse(path, line, "negative duration"));
            }
            Some(d)
        };
        let mut record = FixationRecord::new(timestamp, col, row, field(4));
        record.duration = duration;
        out.push(record);
    }
    Ok(out)
}

/// Writes a fixation log readable by [`read_fixations`].
pub fn write_fixations(records: &[FixationRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::format(path, e.to_string());
    w.write_record(FIXATION_COLUMNS).map_err(csv_err)?;
    for r in records {
        let duration = r.duration.map(|d| d.to_string()).unwrap_or_default();
        w.write_record([
            r.timestamp.to_string(),
            r.col.to_string(),
            r.row.to_string(),
            duration,
            r.observer_id.clone(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::format(path, e.to_string()))?;
    atomic_write(path, &bytes)
}

// ---------------------------------------------------------------------------
// Coordinate maps

const ALPHA_FOREGROUND: u16 = u16::MAX;

/// Compact JSON with the shortest decimal form of each coefficient, so the
/// unit box reads `{"min":[0,0,0],"range":[1,1,1]}`.
pub fn scale_to_json(scale: &ScaleSpec) -> String {
    let list = |v: [f64; 3]| format!("[{},{},{}]", v[0], v[1], v[2]);
    format!("{{\"min\":{},\"range\":{}}}", list(scale.min()), list(scale.range()))
}

pub fn write_scale(scale: &ScaleSpec, path: &Path) -> Result<()> {
    let mut s = scale_to_json(scale);
    s.push('\n');
    atomic_write(path, s.as_bytes())
}

pub fn read_scale(path: &Path) -> Result<ScaleSpec> {
    let text = read_text(path)?;
    let raw: ScaleSpec =
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
    ScaleSpec::new(raw.min(), raw.range()).map_err(|e| Error::format(path, e.to_string()))
}

fn encode_png(map: &CoordinateMap, path: &Path) -> Result<Vec<u8>> {
    let mut data = Vec::with_capacity(map.pixels().len() * 8);
    for (px, &fg) in map.pixels().iter().zip(map.mask()) {
        let alpha = if fg { ALPHA_FOREGROUND } else { 0 };
        for c in [px[0], px[1], px[2], alpha] {
            data.extend_from_slice(&c.to_be_bytes());
        }
    }
    let mut out = Vec::new();
    let png_err = |e: png::EncodingError| Error::format(path, e.to_string());
    {
        let mut enc = png::Encoder::new(&mut out, map.width(), map.height());
        enc.set_color(png::ColorType::Rgba);
        enc.set_depth(png::BitDepth::Sixteen);
        enc.set_source_gamma(png::ScaledFloat::new(1.0));
        let mut writer = enc.write_header().map_err(png_err)?;
        writer.write_image_data(&data).map_err(png_err)?;
        writer.finish().map_err(png_err)?;
    }
    Ok(out)
}

fn decode_png(path: &Path, scale: ScaleSpec) -> Result<CoordinateMap> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let png_err = |e: png::DecodingError| Error::format(path, e.to_string());
    let mut reader = decoder.read_info().map_err(png_err)?;
    let info = reader.info();
    if info.bit_depth != png::BitDepth::Sixteen {
        return Err(Error::format(path, "coordinate maps require 16-bit depth"));
    }
    let channels = match info.color_type {
        png::ColorType::Rgba => 4,
        png::ColorType::Rgb => 3,
        other => {
            return Err(Error::format(path, format!("coordinate maps must be RGB or RGBA, got {other:?}")))
        }
    };
    let (width, height) = (info.width, info.height);
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::format(path, "image too large"))?;
    let mut buf = vec![0u8; size];
    let frame = reader.next_frame(&mut buf).map_err(png_err)?;
    let buf = &buf[..frame.buffer_size()];

    let n = width as usize * height as usize;
    let mut pixels = Vec::with_capacity(n);
    let mut mask = Vec::with_capacity(n);
    for px in buf.chunks_exact(channels * 2) {
        let c = |i: usize| u16::from_be_bytes([px[2 * i], px[2 * i + 1]]);
        pixels.push([c(0), c(1), c(2)]);
        mask.push(channels == 3 || c(3) > 0);
    }
    CoordinateMap::from_parts(width, height, pixels, mask, scale)
        .map_err(|e| Error::format(path, e.to_string()))
}

/// Writes `<prefix>.png` and `<prefix>.scale.json`.
pub fn write_coordmap(map: &CoordinateMap, prefix: &Path) -> Result<()> {
    let png_path = with_suffix(prefix, ".png");
    let bytes = encode_png(map, &png_path)?;
    atomic_write(&png_path, &bytes)?;
    write_scale(map.scale(), &sidecar_path(prefix))
}

pub fn read_coordmap(prefix: &Path) -> Result<CoordinateMap> {
    let scale = read_scale(&sidecar_path(prefix))?;
    decode_png(&with_suffix(prefix, ".png"), scale)
}

/// Writes `<prefix>_NNNN.png` per frame and one shared sidecar. All maps must
/// share one scale.
pub fn write_coordmap_sequence(maps: &[CoordinateMap], prefix: &Path) -> Result<()> {
    let Some(first) = maps.first() else {
        return Err(Error::InvalidMap("no frames to write".into()));
    };
    if maps.iter().any(|m| m.scale() != first.scale()) {
        return Err(Error::MixedScales);
    }
    for (i, map) in maps.iter().enumerate() {
        let path = frame_path(prefix, i as u32);
        let bytes = encode_png(map, &path)?;
        atomic_write(&path, &bytes)?;
    }
    write_scale(first.scale(), &sidecar_path(prefix))
}

/// Reads frames `<prefix>_0000.png`, `<prefix>_0001.png`, ... up to the first
/// missing index.
pub fn read_coordmap_sequence(prefix: &Path) -> Result<Vec<CoordinateMap>> {
    let scale = read_scale(&sidecar_path(prefix))?;
    let mut maps = Vec::new();
    loop {
        let path = frame_path(prefix, maps.len() as u32);
        if !path.exists() {
            break;
        }
        maps.push(decode_png(&path, scale)?);
    }
    if maps.is_empty() {
        return Err(Error::format(frame_path(prefix, 0), "no coordinate-map frames found"));
    }
    Ok(maps)
}

// ---------------------------------------------------------------------------
// PLY

/// Nine significant digits, printed in shortest form.
fn sig9(v: f64) -> String {
    let rounded: f64 = format!("{v:.8e}").parse().unwrap_or(v);
    format!("{rounded}")
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PlyType {
    Int,
    Float,
}

impl PlyType {
    fn parse(name: &str) -> Option<Self> {
        match name {
            "char" | "uchar" | "short" | "ushort" | "int" | "uint" | "int8" | "uint8" | "int16"
            | "uint16" | "int32" | "uint32" => Some(PlyType::Int),
            "float" | "double" | "float32" | "float64" => Some(PlyType::Float),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
enum PlyProperty {
    Scalar(String, PlyType),
    List(String, PlyType),
}

impl PlyProperty {
    fn name(&self) -> &str {
        match self {
            PlyProperty::Scalar(n, _) | PlyProperty::List(n, _) => n,
        }
    }
}

#[derive(Debug, Clone)]
enum PlyValue {
    Scalar(f64),
    List(Vec<f64>),
}

#[derive(Debug)]
struct PlyElement {
    name: String,
    properties: Vec<PlyProperty>,
    rows: Vec<Vec<PlyValue>>,
}

impl PlyElement {
    fn column(&self, name: &str) -> Option<usize> {
        self.properties.iter().position(|p| p.name() == name)
    }
}

#[derive(Debug)]
struct PlyFile {
    comments: Vec<String>,
    elements: Vec<PlyElement>,
}

impl PlyFile {
    fn element(&self, name: &str) -> Option<&PlyElement> {
        self.elements.iter().find(|e| e.name == name)
    }
}

fn parse_ply(path: &Path) -> Result<PlyFile> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let bad = |line: usize, msg: String| Error::parse(path, line, msg);

    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(bad(1, "missing `ply` magic".into())),
    }
    let mut comments = Vec::new();
    let mut elements: Vec<(PlyElement, usize)> = Vec::new();
    let mut saw_format = false;
    let mut header_done = false;
    for (n, line) in lines.by_ref() {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("format") => {
                if tok.next() != Some("ascii") {
                    return Err(bad(n, "only ASCII PLY is supported".into()));
                }
                saw_format = true;
            }
            Some("comment") => {
                let rest = line.trim_start().strip_prefix("comment").unwrap_or("");
                comments.push(rest.trim().to_string());
            }
            Some("obj_info") | None => {}
            Some("element") => {
                let name = tok.next().ok_or_else(|| bad(n, "element without name".into()))?;
                let count = tok
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| bad(n, "element without valid count".into()))?;
                elements.push((
                    PlyElement {
                        name: name.to_string(),
                        properties: Vec::new(),
                        rows: Vec::with_capacity(count),
                    },
                    count,
                ));
            }
            Some("property") => {
                let (el, _) = elements
                    .last_mut()
                    .ok_or_else(|| bad(n, "property before any element".into()))?;
                let parts: Vec<&str> = tok.collect();
                let prop = match parts.as_slice() {
                    ["list", count_ty, item_ty, name] => {
                        if PlyType::parse(count_ty) != Some(PlyType::Int) {
                            return Err(bad(n, format!("invalid list count type `{count_ty}`")));
                        }
                        let ty = PlyType::parse(item_ty)
                            .ok_or_else(|| bad(n, format!("unknown type `{item_ty}`")))?;
                        PlyProperty::List(name.to_string(), ty)
                    }
                    [ty, name] => {
                        let ty = PlyType::parse(ty).ok_or_else(|| bad(n, format!("unknown type `{ty}`")))?;
                        PlyProperty::Scalar(name.to_string(), ty)
                    }
                    _ => return Err(bad(n, format!("malformed property line `{line}`"))),
                };
                el.properties.push(prop);
            }
            Some("end_header") => {
                header_done = true;
                break;
            }
            Some(other) => return Err(bad(n, format!("unexpected header keyword `{other}`"))),
        }
    }
    if !saw_format {
        return Err(bad(1, "missing format line".into()));
    }
    if !header_done {
        return Err(bad(text.lines().count(), "missing end_header".into()));
    }

    let parse_num = |n: usize, s: &str, ty: PlyType| -> Result<f64> {
        let v: f64 = s
            .parse()
            .map_err(|_| bad(n, format!("malformed number `{s}`")))?;
        if ty == PlyType::Int && v.fract() != 0.0 {
            return Err(bad(n, format!("expected integer, found `{s}`")));
        }
        Ok(v)
    };

    let mut data = lines.filter(|(_, l)| !l.trim().is_empty());
    let mut out = Vec::with_capacity(elements.len());
    for (mut el, count) in elements {
        for _ in 0..count {
            let (n, line) = data
                .next()
                .ok_or_else(|| bad(text.lines().count(), format!("truncated `{}` data", el.name)))?;
            let mut tok = line.split_whitespace();
            let mut row = Vec::with_capacity(el.properties.len());
            for prop in &el.properties {
                let mut next = || tok.next().ok_or_else(|| bad(n, "too few values".into()));
                match prop {
                    PlyProperty::Scalar(_, ty) => row.push(PlyValue::Scalar(parse_num(n, next()?, *ty)?)),
                    PlyProperty::List(_, ty) => {
                        let len = parse_num(n, next()?, PlyType::Int)?;
                        if len < 0.0 {
                            return Err(bad(n, "negative list length".into()));
                        }
                        let items = (0..len as usize)
                            .map(|_| parse_num(n, next()?, *ty))
                            .collect::<Result<Vec<_>>>()?;
                        row.push(PlyValue::List(items));
                    }
                }
            }
            if tok.next().is_some() {
                return Err(bad(n, "too many values".into()));
            }
            el.rows.push(row);
        }
        out.push(el);
    }
    if let Some((n, _)) = data.next() {
        return Err(bad(n, "unexpected data after last element".into()));
    }
    Ok(PlyFile {
        comments,
        elements: out,
    })
}

fn scalar_column(el: &PlyElement, name: &str, path: &Path) -> Result<Vec<f64>> {
    let i = el
        .column(name)
        .ok_or_else(|| Error::format(path, format!("element `{}` lacks property `{name}`", el.name)))?;
    el.rows
        .iter()
        .map(|row| match &row[i] {
            PlyValue::Scalar(v) => Ok(*v),
            PlyValue::List(_) => Err(Error::format(path, format!("property `{name}` must be scalar"))),
        })
        .collect()
}

fn optional_column(el: &PlyElement, name: &str, path: &Path) -> Result<Option<Vec<f64>>> {
    el.column(name).map(|_| scalar_column(el, name, path)).transpose()
}

fn positions(el: &PlyElement, path: &Path) -> Result<Vec<Point3>> {
    let x = scalar_column(el, "x", path)?;
    let y = scalar_column(el, "y", path)?;
    let z = scalar_column(el, "z", path)?;
    Ok((0..x.len()).map(|i| Point3::new(x[i], y[i], z[i])).collect())
}

/// ASCII PLY with float positions at nine significant digits, optional uchar
/// colors and an optional int `region` property.
pub fn mesh_to_ply(mesh: &SurfaceMesh) -> String {
    let mut s = String::new();
    let colors = mesh.vertex_colors();
    let labels = mesh.region_labels();
    s.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(s, "element vertex {}", mesh.vertices().len());
    s.push_str("property float x\nproperty float y\nproperty float z\n");
    if colors.is_some() {
        s.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    if labels.is_some() {
        s.push_str("property int region\n");
    }
    let _ = writeln!(s, "element face {}", mesh.faces().len());
    s.push_str("property list uchar int vertex_indices\nend_header\n");
    for (i, v) in mesh.vertices().iter().enumerate() {
        let _ = write!(s, "{} {} {}", sig9(v.x), sig9(v.y), sig9(v.z));
        if let Some(c) = colors {
            let [r, g, b] = c[i].map(|x| (x * 255.0).round() as u8);
            let _ = write!(s, " {r} {g} {b}");
        }
        if let Some(l) = labels {
            let _ = write!(s, " {}", l[i]);
        }
        s.push('\n');
    }
    for f in mesh.faces() {
        let _ = writeln!(s, "3 {} {} {}", f[0], f[1], f[2]);
    }
    s
}

pub fn write_mesh(mesh: &SurfaceMesh, path: &Path) -> Result<()> {
    atomic_write(path, mesh_to_ply(mesh).as_bytes())
}

pub fn read_mesh(path: &Path) -> Result<SurfaceMesh> {
    let ply = parse_ply(path)?;
    let verts = ply
        .element("vertex")
        .ok_or_else(|| Error::format(path, "no vertex element"))?;
    let vertices = positions(verts, path)?;

    let mut faces = Vec::new();
    if let Some(face_el) = ply.element("face") {
        let i = face_el
            .column("vertex_indices")
            .or_else(|| face_el.column("vertex_index"))
            .ok_or_else(|| Error::format(path, "face element lacks vertex_indices"))?;
        for (k, row) in face_el.rows.iter().enumerate() {
            let PlyValue::List(idx) = &row[i] else {
                return Err(Error::format(path, "vertex_indices must be a list"));
            };
            if idx.len() != 3 {
                return Err(Error::format(
                    path,
                    format!("face {k} has {} vertices; only triangles are supported", idx.len()),
                ));
            }
            let conv = |v: f64| {
                u32::try_from(v as i64).map_err(|_| Error::format(path, format!("face {k} has negative index")))
            };
            faces.push([conv(idx[0])?, conv(idx[1])?, conv(idx[2])?]);
        }
    }
    let wrap = |e: Error| Error::format(path, e.to_string());
    let mut mesh = SurfaceMesh::new(vertices, faces).map_err(wrap)?;

    if let (Some(r), Some(g), Some(b)) = (
        optional_column(verts, "red", path)?,
        optional_column(verts, "green", path)?,
        optional_column(verts, "blue", path)?,
    ) {
        let colors = (0..r.len()).map(|i| [r[i] / 255.0, g[i] / 255.0, b[i] / 255.0]).collect();
        mesh = mesh.with_vertex_colors(colors).map_err(wrap)?;
    }
    if let Some(labels) = optional_column(verts, "region", path)? {
        mesh = mesh
            .with_region_labels(labels.into_iter().map(|l| l as i32).collect())
            .map_err(wrap)?;
    }
    Ok(mesh)
}

/// Point-cloud PLY. Coordinates, weights and timestamps are printed in
/// shortest round-trip form, so reading back is exact. Observer ids are
/// stored as header comments and referenced by index.
pub fn cloud_to_ply(cloud: &FixationCloud3D) -> String {
    let mut observers: Vec<&str> = Vec::new();
    let mut observer_index = Vec::with_capacity(cloud.len());
    for p in cloud.provenance() {
        let idx = match observers.iter().position(|o| *o == p.observer_id) {
            Some(i) => i,
            None => {
                observers.push(&p.observer_id);
                observers.len() - 1
            }
        };
        observer_index.push(idx);
    }
    let mut s = String::from("ply\nformat ascii 1.0\n");
    let _ = writeln!(s, "comment dropped_count {}", cloud.dropped_count);
    for (i, o) in observers.iter().enumerate() {
        let _ = writeln!(s, "comment observer {i} {o}");
    }
    let _ = writeln!(s, "element vertex {}", cloud.len());
    for p in ["x", "y", "z", "weight", "timestamp"] {
        let _ = writeln!(s, "property double {p}");
    }
    s.push_str("property uint frame\nproperty int observer\nend_header\n");
    for (i, ((p, w), prov)) in cloud
        .points()
        .iter()
        .zip(cloud.weights())
        .zip(cloud.provenance())
        .enumerate()
    {
        let _ = writeln!(
            s,
            "{} {} {} {} {} {} {}",
            p.x, p.y, p.z, w, prov.timestamp, prov.frame_index, observer_index[i]
        );
    }
    s
}

pub fn write_cloud(cloud: &FixationCloud3D, path: &Path) -> Result<()> {
    atomic_write(path, cloud_to_ply(cloud).as_bytes())
}

pub fn read_cloud(path: &Path) -> Result<FixationCloud3D> {
    let ply = parse_ply(path)?;
    let mut observers: BTreeMap<usize, String> = BTreeMap::new();
    let mut dropped = 0usize;
    for c in &ply.comments {
        let mut tok = c.splitn(3, ' ');
        match (tok.next(), tok.next(), tok.next()) {
            (Some("dropped_count"), Some(n), None) => {
                dropped = n
                    .parse()
                    .map_err(|_| Error::format(path, format!("bad dropped_count `{n}`")))?;
            }
            (Some("observer"), Some(i), id) => {
                let i = i
                    .parse()
                    .map_err(|_| Error::format(path, format!("bad observer index `{i}`")))?;
                observers.insert(i, id.unwrap_or_default().to_string());
            }
            _ => {}
        }
    }
    let mut cloud = FixationCloud3D::new();
    cloud.dropped_count = dropped;
    let Some(verts) = ply.element("vertex") else {
        return Ok(cloud);
    };
    let points = positions(verts, path)?;
    let n = points.len();
    let weights = optional_column(verts, "weight", path)?.unwrap_or_else(|| vec![1.0; n]);
    let times = optional_column(verts, "timestamp", path)?.unwrap_or_else(|| vec![0.0; n]);
    let frames = optional_column(verts, "frame", path)?.unwrap_or_else(|| vec![0.0; n]);
    let obs = optional_column(verts, "observer", path)?;
    for i in 0..n {
        let observer_id = match &obs {
            Some(o) => observers
                .get(&(o[i] as usize))
                .cloned()
                .ok_or_else(|| Error::format(path, format!("vertex {i} names unknown observer {}", o[i])))?,
            None => String::new(),
        };
        let prov = Provenance {
            observer_id,
            timestamp: times[i],
            frame_index: frames[i] as u32,
        };
        cloud
            .push(points[i], weights[i], prov)
            .map_err(|e| Error::format(path, format!("vertex {i}: {e}")))?;
    }
    Ok(cloud)
}

// ---------------------------------------------------------------------------
// Region labels

pub fn write_region_labels(labels: &[i32], path: &Path) -> Result<()> {
    let mut s = String::with_capacity(labels.len() * 3);
    for l in labels {
        let _ = writeln!(s, "{l}");
    }
    atomic_write(path, s.as_bytes())
}

pub fn read_region_labels(path: &Path) -> Result<Vec<i32>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        out.push(
            content
                .parse()
                .map_err(|_| Error::parse(path, i + 1, format!("malformed region label `{content}`")))?,
        );
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Voxel grids

pub const GRID_MAGIC: [u8; 8] = *b"GZVOXGRD";
pub const GRID_VERSION: u32 = 1;
const GRID_HEADER_LEN: usize = 16 + 3 * 8 + 3 * 8 + 8;

pub fn grid_to_bytes(grid: &VoxelGrid) -> Vec<u8> {
    let mut b = Vec::with_capacity(GRID_HEADER_LEN + grid.len() * 8);
    b.extend_from_slice(&GRID_MAGIC);
    b.extend_from_slice(&GRID_VERSION.to_le_bytes());
    b.extend_from_slice(&0u32.to_le_bytes());
    for d in grid.dims() {
        b.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for c in grid.origin().to_array() {
        b.extend_from_slice(&c.to_le_bytes());
    }
    b.extend_from_slice(&grid.voxel_size().to_le_bytes());
    for v in grid.values() {
        b.extend_from_slice(&v.to_le_bytes());
    }
    b
}

pub fn write_grid(grid: &VoxelGrid, path: &Path) -> Result<()> {
    atomic_write(path, &grid_to_bytes(grid))
}

pub fn read_grid(path: &Path) -> Result<VoxelGrid> {
    let bytes = read_bytes(path)?;
    let err = |offset: usize, msg: &str| Error::format(path, format!("{msg} at byte {offset}"));
    if bytes.len() < GRID_HEADER_LEN {
        return Err(err(bytes.len(), "truncated grid header"));
    }
    if bytes[..8] != GRID_MAGIC {
        return Err(err(0, "not a voxel grid file (bad magic)"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(8);
    if version != GRID_VERSION {
        return Err(err(8, &format!("unsupported grid version {version}")));
    }
    let mut dims = [0usize; 3];
    for (i, d) in dims.iter_mut().enumerate() {
        *d = usize::try_from(u64_at(16 + 8 * i)).map_err(|_| err(16 + 8 * i, "dimension too large"))?;
    }
    let origin = Point3::new(f64_at(40), f64_at(48), f64_at(56));
    let voxel_size = f64_at(64);
    let n = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| err(16, "dimensions overflow"))?;
    let expected = n
        .checked_mul(8)
        .and_then(|b| b.checked_add(GRID_HEADER_LEN))
        .ok_or_else(|| err(16, "dimensions overflow"))?;
    if bytes.len() < expected {
        return Err(err(bytes.len(), "truncated grid data"));
    }
    if bytes.len() > expected {
        return Err(err(expected, "trailing bytes after grid data"));
    }
    let values = (0..n).map(|i| f64_at(GRID_HEADER_LEN + 8 * i)).collect();
    VoxelGrid::from_values(dims, origin, voxel_size, values).map_err(|e| Error::format(path, e.to_string()))
}

// ---------------------------------------------------------------------------
// Reports

/// Pretty JSON followed by a newline. Map keys come out sorted, so equal
/// inputs give identical bytes.
pub fn report_to_json<T: Serialize>(report: &BTreeMap<String, T>) -> String {
    let mut s = serde_json::to_string_pretty(report).unwrap_or_else(|_| "{}".into());
    s.push('\n');
    s
}

pub fn write_report<T: Serialize>(report: &BTreeMap<String, T>, path: &Path) -> Result<()> {
    atomic_write(path, report_to_json(report).as_bytes())
}
