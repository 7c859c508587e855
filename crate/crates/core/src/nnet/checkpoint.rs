//! Versioned binary checkpoints: layer dimensions plus row-major `f32`
//! parameter arrays, little endian. Save/load round-trips are bit-exact.

use std::io::{Read, Write};

use super::{Activation, Layer, Matrix, Mlp, NnetError};

const MAGIC: &[u8; 8] = b"AIMCKPT\x01";
const VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn get_u32(input: &mut &[u8]) -> Result<u32, NnetError> {
    if input.len() < 4 {
        return Err(NnetError::Checkpoint("truncated u32".into()));
    }
    let (head, rest) = input.split_at(4);
    *input = rest;
    Ok(u32::from_le_bytes(head.try_into().unwrap()))
}

fn put_f32s(out: &mut Vec<u8>, values: &[f32]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn get_f32s(input: &mut &[u8], n: usize) -> Result<Vec<f32>, NnetError> {
    if input.len() < 4 * n {
        return Err(NnetError::Checkpoint("truncated parameter array".into()));
    }
    let (head, rest) = input.split_at(4 * n);
    *input = rest;
    Ok(head.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
}

fn encode_mlp(out: &mut Vec<u8>, mlp: &Mlp<f32>) {
    put_u32(out, mlp.layers.len() as u32);
    for layer in &mlp.layers {
        put_u32(out, layer.w.cols() as u32);
        put_u32(out, layer.w.rows() as u32);
        out.push(layer.act.code());
        put_f32s(out, layer.w.data());
        put_f32s(out, &layer.b);
    }
}

fn decode_mlp(input: &mut &[u8]) -> Result<Mlp<f32>, NnetError> {
    let n_layers = get_u32(input)? as usize;
    if n_layers == 0 || n_layers > 64 {
        return Err(NnetError::Checkpoint(format!("implausible layer count {n_layers}")));
    }
    let mut layers = Vec::with_capacity(n_layers);
    let mut prev_out: Option<usize> = None;
    for _ in 0..n_layers {
        let fan_in = get_u32(input)? as usize;
        let fan_out = get_u32(input)? as usize;
        if fan_in == 0 || fan_out == 0 || fan_in > 1 << 20 || fan_out > 1 << 20 {
            return Err(NnetError::Checkpoint("implausible layer shape".into()));
        }
        if let Some(prev) = prev_out {
            if prev != fan_in {
                return Err(NnetError::Checkpoint("inconsistent layer dimensions".into()));
            }
        }
        prev_out = Some(fan_out);
        if input.is_empty() {
            return Err(NnetError::Checkpoint("truncated activation".into()));
        }
        let act = Activation::from_code(input[0])
            .ok_or_else(|| NnetError::Checkpoint(format!("unknown activation {}", input[0])))?;
        *input = &input[1..];
        let w = get_f32s(input, fan_in * fan_out)?;
        let b = get_f32s(input, fan_out)?;
        if w.iter().chain(&b).any(|x| !x.is_finite()) {
            return Err(NnetError::Checkpoint("non-finite parameter".into()));
        }
        layers.push(Layer { w: Matrix::from_vec(fan_out, fan_in, w), b, act });
    }
    Ok(Mlp { layers })
}

/// Serialize a set of named networks.
pub fn encode_bundle(nets: &[(&str, &Mlp<f32>)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    put_u32(&mut out, nets.len() as u32);
    for (name, mlp) in nets {
        let bytes = name.as_bytes();
        put_u32(&mut out, bytes.len() as u32);
        out.extend_from_slice(bytes);
        encode_mlp(&mut out, mlp);
    }
    out
}

/// Parse a checkpoint bundle. Rejects unknown magic/version and any
/// structurally inconsistent content.
pub fn decode_bundle(mut input: &[u8]) -> Result<Vec<(String, Mlp<f32>)>, NnetError> {
    if input.len() < MAGIC.len() || &input[..MAGIC.len()] != MAGIC {
        return Err(NnetError::Checkpoint("bad magic".into()));
    }
    input = &input[MAGIC.len()..];
    let version = get_u32(&mut input)?;
    if version != VERSION {
        return Err(NnetError::Checkpoint(format!("unsupported version {version}")));
    }
    let count = get_u32(&mut input)? as usize;
    if count > 64 {
        return Err(NnetError::Checkpoint(format!("implausible net count {count}")));
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = get_u32(&mut input)? as usize;
        if name_len > 256 || input.len() < name_len {
            return Err(NnetError::Checkpoint("bad name length".into()));
        }
        let name = std::str::from_utf8(&input[..name_len])
            .map_err(|_| NnetError::Checkpoint("name is not utf-8".into()))?
            .to_string();
        input = &input[name_len..];
        out.push((name, decode_mlp(&mut input)?));
    }
    if !input.is_empty() {
        return Err(NnetError::Checkpoint("trailing bytes".into()));
    }
    Ok(out)
}

pub fn save_bundle(path: &std::path::Path, nets: &[(&str, &Mlp<f32>)]) -> Result<(), NnetError> {
    let bytes = encode_bundle(nets);
    let mut file = std::fs::File::create(path)
        .map_err(|e| NnetError::Checkpoint(format!("create {}: {e}", path.display())))?;
    file.write_all(&bytes)
        .map_err(|e| NnetError::Checkpoint(format!("write {}: {e}", path.display())))
}

pub fn load_bundle(path: &std::path::Path) -> Result<Vec<(String, Mlp<f32>)>, NnetError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .map_err(|e| NnetError::Checkpoint(format!("open {}: {e}", path.display())))?
        .read_to_end(&mut bytes)
        .map_err(|e| NnetError::Checkpoint(format!("read {}: {e}", path.display())))?;
    decode_bundle(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a: Mlp<f32> = Mlp::new(
            &[10, 20, 5],
            &[Activation::Relu, Activation::Sigmoid],
            &mut rng,
        );
        let b: Mlp<f32> = Mlp::new(&[4, 4], &[Activation::Tanh], &mut rng);
        let bytes = encode_bundle(&[("actor", &a), ("critic", &b)]);
        let decoded = decode_bundle(&bytes).unwrap();
        assert_eq!(decoded.len(), 2);
        assert_eq!(decoded[0].0, "actor");
        for (orig, loaded) in a.layers.iter().zip(&decoded[0].1.layers) {
            assert_eq!(orig.w.data(), loaded.w.data());
            assert_eq!(orig.b, loaded.b);
            assert_eq!(orig.act, loaded.act);
        }
        // Re-encode reproduces identical bytes.
        let bytes2 = encode_bundle(&[("actor", &decoded[0].1), ("critic", &decoded[1].1)]);
        assert_eq!(bytes, bytes2);
    }

    #[test]
    fn corrupt_inputs_are_rejected_without_panicking() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a: Mlp<f32> = Mlp::new(&[3, 2], &[Activation::Identity], &mut rng);
        let bytes = encode_bundle(&[("n", &a)]);

        assert!(decode_bundle(b"garbage").is_err());
        // Flip the version.
        let mut bad = bytes.clone();
        bad[8] = 99;
        assert!(decode_bundle(&bad).is_err());
        // Truncations at every prefix must error, never panic.
        for cut in 0..bytes.len() {
            let _ = decode_bundle(&bytes[..cut]);
        }
        // Trailing junk.
        let mut extended = bytes.clone();
        extended.push(0);
        assert!(decode_bundle(&extended).is_err());
    }
}
