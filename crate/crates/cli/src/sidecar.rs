//! Long integer arrays move out of JSON into a little-endian u32 file,
//! replaced in place by `{"$sidecar": [offset, len]}`.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::fs;
use std::io::{self, Write};
use std::path::Path;

/// Arrays with more elements than this go to the sidecar.
pub const INLINE_MAX: usize = 4096;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SidecarRef {
    /// File name relative to the JSON document.
    pub path: String,
    pub sha256: String,
    pub elements: u64,
}

fn as_u32_array(v: &[Value]) -> Option<Vec<u32>> {
    v.iter().map(|x| x.as_u64().and_then(|n| u32::try_from(n).ok())).collect()
}

fn extract(v: &mut Value, out: &mut Vec<u32>) {
    match v {
        Value::Array(items) if items.len() > INLINE_MAX => {
            if let Some(nums) = as_u32_array(items) {
                let off = out.len();
                out.extend_from_slice(&nums);
                *v = json!({ "$sidecar": [off, nums.len()] });
            } else {
                items.iter_mut().for_each(|x| extract(x, out));
            }
        }
        Value::Array(items) => items.iter_mut().for_each(|x| extract(x, out)),
        Value::Object(map) => map.values_mut().for_each(|x| extract(x, out)),
        _ => {}
    }
}

fn restore(v: &mut Value, data: &[u32]) -> Result<(), String> {
    match v {
        Value::Object(map) if map.len() == 1 && map.contains_key("$sidecar") => {
            let r = &map["$sidecar"];
            let (off, len) = (r[0].as_u64().ok_or("bad sidecar offset")? as usize, r[1].as_u64().ok_or("bad sidecar length")? as usize);
            let slice = data.get(off..off + len).ok_or("sidecar reference out of range")?;
            *v = Value::Array(slice.iter().map(|&n| Value::from(n)).collect());
        }
        Value::Array(items) => items.iter_mut().try_for_each(|x| restore(x, data))?,
        Value::Object(map) => map.values_mut().try_for_each(|x| restore(x, data))?,
        _ => {}
    }
    Ok(())
}

fn checksum(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Moves long arrays of `doc` into `<json path>.bin` and records the file
/// under the top-level key "sidecar". No file is written if nothing moved.
pub fn split_and_write(mut doc: Value, json_path: &Path) -> io::Result<Value> {
    let mut data = Vec::new();
    extract(&mut doc, &mut data);
    if !data.is_empty() {
        let bin = json_path.with_extension("bin");
        let bytes: Vec<u8> = data.iter().flat_map(|n| n.to_le_bytes()).collect();
        fs::write(&bin, &bytes)?;
        let r = SidecarRef {
            path: bin.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
            sha256: checksum(&bytes),
            elements: data.len() as u64,
        };
        if let Value::Object(m) = &mut doc {
            m.insert("sidecar".into(), serde_json::to_value(r).expect("plain struct"));
        }
    }
    let mut f = fs::File::create(json_path)?;
    serde_json::to_writer_pretty(&mut f, &doc)?;
    f.write_all(b"\n")?;
    Ok(doc)
}

/// Reads a JSON document and inlines its sidecar after checking the digest.
pub fn read(json_path: &Path) -> Result<Value, String> {
    let text = fs::read_to_string(json_path).map_err(|e| format!("{}: {e}", json_path.display()))?;
    let mut doc: Value = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", json_path.display()))?;
    let Some(r) = doc.get("sidecar").cloned() else { return Ok(doc) };
    let r: SidecarRef = serde_json::from_value(r).map_err(|e| e.to_string())?;
    let bin = json_path.with_file_name(&r.path);
    let bytes = fs::read(&bin).map_err(|e| format!("{}: {e}", bin.display()))?;
    if checksum(&bytes) != r.sha256 {
        return Err(format!("{}: checksum mismatch", bin.display()));
    }
    if bytes.len() as u64 != 4 * r.elements {
        return Err(format!("{}: expected {} elements", bin.display(), r.elements));
    }
    let data: Vec<u32> = bytes.chunks_exact(4).map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    restore(&mut doc, &data)?;
    if let Value::Object(m) = &mut doc {
        m.remove("sidecar");
    }
    Ok(doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_checksum() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("doc.json");
        let long: Vec<u32> = (0..10_000).collect();
        let doc = json!({ "a": { "table": long }, "short": [1, 2, 3] });
        let written = split_and_write(doc.clone(), &p).unwrap();
        assert!(written["a"]["table"].get("$sidecar").is_some());
        assert_eq!(read(&p).unwrap(), doc);
        let bin = dir.path().join("doc.bin");
        let mut bytes = fs::read(&bin).unwrap();
        bytes[0] ^= 1;
        fs::write(&bin, bytes).unwrap();
        assert!(read(&p).unwrap_err().contains("checksum"));
    }
}
