//! Model checkpoints: a directory of tensor blobs plus `manifest.txt`.
//!
//! Each manifest line is `<parameter name> <file name>`, in the order the
//! module tree reports its parameters.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::Module;
use crate::error::{Error, Result};
use crate::tensor::{io, Element, Tensor};

pub const MANIFEST: &str = "manifest.txt";

fn file_name(index: usize, name: &str) -> String {
    let clean: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '_' {
                c
            } else {
                '-'
            }
        })
        .collect();
    format!("{index:04}_{clean}.hyqt")
}

/// Writes named tensors into `dir` (created if missing).
pub fn save_tensors<T: Element>(
    dir: impl AsRef<Path>,
    tensors: &[(String, Tensor<T>)],
) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut manifest = String::new();
    for (i, (name, t)) in tensors.iter().enumerate() {
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(Error::Contract(format!(
                "invalid checkpoint entry name {name:?}"
            )));
        }
        let file = file_name(i, name);
        io::save(t, dir.join(&file))?;
        manifest.push_str(&format!("{name} {file}\n"));
    }
    fs::write(dir.join(MANIFEST), manifest)?;
    Ok(())
}

/// Reads every entry listed in `dir/manifest.txt`, in manifest order.
pub fn load_tensors<T: Element>(dir: impl AsRef<Path>) -> Result<Vec<(String, Tensor<T>)>> {
    let dir = dir.as_ref();
    let manifest = fs::read_to_string(dir.join(MANIFEST))?;
    let mut out = Vec::new();
    for (lineno, line) in manifest.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(name), Some(file), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Format(format!(
                "manifest line {}: {line:?}",
                lineno + 1
            )));
        };
        out.push((name.to_string(), io::load(dir.join(file))?));
    }
    Ok(out)
}

pub fn save_module<T: Element, M: Module<T> + ?Sized>(
    module: &M,
    dir: impl AsRef<Path>,
) -> Result<()> {
    let entries: Vec<(String, Tensor<T>)> = module
        .named_parameters()
        .into_iter()
        .map(|(n, p)| (n, p.tensor().clone()))
        .collect();
    save_tensors(dir, &entries)
}

/// Copies stored values into the module's parameters. Every parameter must
/// be present with a matching shape.
pub fn load_module<T: Element, M: Module<T> + ?Sized>(
    module: &M,
    dir: impl AsRef<Path>,
) -> Result<()> {
    let stored: HashMap<String, Tensor<T>> = load_tensors(dir)?.into_iter().collect();
    for (name, p) in module.named_parameters() {
        let t = stored
            .get(&name)
            .ok_or_else(|| Error::Format(format!("checkpoint has no entry for {name}")))?;
        if t.shape() != p.shape() {
            return Err(Error::dim(format!(
                "checkpoint {name} has shape {:?}, parameter is {:?}",
                t.shape(),
                p.shape()
            )));
        }
        p.set_data(t.to_vec())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Linear, Sequential};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(seed: u64) -> Sequential<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Sequential::new()
            .push("fc1", Linear::new(3, 2, &mut rng).unwrap())
            .push("fc2", Linear::new(2, 1, &mut rng).unwrap())
    }

    #[test]
    fn module_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let a = model(1);
        save_module(&a, dir.path()).unwrap();
        let manifest = fs::read_to_string(dir.path().join(MANIFEST)).unwrap();
        assert!(manifest.starts_with("fc1.weight 0000_fc1.weight.hyqt\n"));
        let b = model(2);
        load_module(&b, dir.path()).unwrap();
        for ((_, pa), (_, pb)) in a.named_parameters().iter().zip(b.named_parameters().iter()) {
            assert_eq!(pa.to_vec(), pb.to_vec());
        }
    }

    #[test]
    fn missing_entry_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        save_tensors::<f32>(dir.path(), &[]).unwrap();
        assert!(matches!(
            load_module(&model(0), dir.path()),
            Err(Error::Format(_))
        ));
    }
}
