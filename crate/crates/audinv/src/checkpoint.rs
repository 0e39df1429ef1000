//! Checkpoint directories: a safetensors parameter blob plus a JSON manifest.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use audinv_core::audio::SpectrogramConfig;
use audinv_core::classifier::DigitClassifier;
use audinv_core::generator::{Critic, CriticArch, Generator, GeneratorArch};
use audinv_core::inversion::InverseMapper;
use audinv_core::nn::ParamSet;
use audinv_core::resnet::ResNetArch;
use audinv_core::tensor::Tensor;
use safetensors::tensor::{Dtype, TensorView};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const PARAMS_FILE: &str = "params.safetensors";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const LOG_FILE: &str = "train_log.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Generator {
        arch: GeneratorArch,
        latent_dim: usize,
        output_length: usize,
    },
    Critic {
        arch: CriticArch,
    },
    Classifier {
        arch: ResNetArch,
        spectrogram: SpectrogramConfig,
        clip_length: usize,
        num_classes: usize,
        input_shape: [usize; 2],
        taps: Vec<String>,
    },
    Mapper {
        arch: ResNetArch,
        spectrogram: SpectrogramConfig,
        clip_length: usize,
        latent_dim: usize,
        input_shape: [usize; 2],
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(flatten)]
    pub model: ModelSpec,
    pub config_hash: String,
    pub seed: u64,
    pub params_sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of a value's JSON serialization.
pub fn config_hash(value: &impl Serialize) -> String {
    sha256_hex(&serde_json::to_vec(value).expect("config serializes"))
}

fn params_bytes(ps: &ParamSet) -> Result<Vec<u8>> {
    let raw: Vec<(String, Vec<u8>, Vec<usize>)> = ps
        .entries()
        .iter()
        .map(|e| {
            (e.name.clone(), e.tensor.data().iter().flat_map(|v| v.to_le_bytes()).collect(), e.tensor.shape().to_vec())
        })
        .collect();
    let views = raw
        .iter()
        .map(|(name, bytes, shape)| Ok((name.clone(), TensorView::new(Dtype::F32, shape.clone(), bytes)?)))
        .collect::<Result<Vec<_>, safetensors::SafeTensorError>>()?;
    let order: HashMap<String, String> =
        ps.entries().iter().enumerate().map(|(i, e)| (format!("order.{i:05}"), e.name.clone())).collect();
    Ok(safetensors::serialize(views, &Some(order))?)
}

/// Tensors in the order of the original parameter set.
pub fn read_params(path: &Path) -> Result<Vec<(String, Tensor)>> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_params(&bytes)
}

fn parse_params(bytes: &[u8]) -> Result<Vec<(String, Tensor)>> {
    let (_, meta) = safetensors::SafeTensors::read_metadata(bytes)?;
    let st = safetensors::SafeTensors::deserialize(bytes)?;
    let mut order: Vec<(String, String)> = meta.metadata().clone().unwrap_or_default().into_iter().collect();
    order.sort();
    let names: Vec<String> = if order.is_empty() {
        st.names().into_iter().cloned().collect()
    } else {
        order.into_iter().map(|(_, n)| n).collect()
    };
    names
        .into_iter()
        .map(|name| {
            let view = st.tensor(&name)?;
            ensure!(view.dtype() == Dtype::F32, "tensor {name}: expected f32, found {:?}", view.dtype());
            let data = view.data().chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
            Ok((name, Tensor::new(view.shape(), data)))
        })
        .collect()
}

fn save(dir: &Path, ps: &ParamSet, model: ModelSpec, config_hash: &str, seed: u64) -> Result<Manifest> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let bytes = params_bytes(ps)?;
    fs::write(dir.join(PARAMS_FILE), &bytes)?;
    let manifest = Manifest { model, config_hash: config_hash.to_string(), seed, params_sha256: sha256_hex(&bytes) };
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Read and verify a checkpoint; `what` names the checkpoint in errors.
pub fn load(dir: &Path, what: &str) -> Result<(Manifest, Vec<(String, Tensor)>)> {
    let mpath = dir.join(MANIFEST_FILE);
    if !mpath.exists() {
        bail!("missing {what} checkpoint: {} not found", mpath.display());
    }
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(&mpath)?)
        .with_context(|| format!("malformed manifest {}", mpath.display()))?;
    let bytes = fs::read(dir.join(PARAMS_FILE)).with_context(|| format!("missing parameters for {what} checkpoint"))?;
    ensure!(
        sha256_hex(&bytes) == manifest.params_sha256,
        "{what} checkpoint parameters do not match the manifest hash"
    );
    Ok((manifest, parse_params(&bytes)?))
}

pub fn write_log(dir: &Path, log: &impl Serialize) -> Result<()> {
    fs::write(dir.join(LOG_FILE), serde_json::to_string(log)?)?;
    Ok(())
}

pub fn save_generator(dir: &Path, g: &Generator, config_hash: &str, seed: u64) -> Result<Manifest> {
    let model = ModelSpec::Generator { arch: g.arch, latent_dim: g.latent_dim(), output_length: g.output_length() };
    save(dir, &g.params, model, config_hash, seed)
}

pub fn load_generator(dir: &Path) -> Result<(Generator, Manifest)> {
    let (m, values) = load(dir, "gan")?;
    let ModelSpec::Generator { arch, .. } = m.model else { bail!("{} is not a generator checkpoint", dir.display()) };
    Ok((Generator::from_values(arch, values)?, m))
}

pub fn save_critic(dir: &Path, c: &Critic, config_hash: &str, seed: u64) -> Result<Manifest> {
    save(dir, &c.params, ModelSpec::Critic { arch: c.arch }, config_hash, seed)
}

pub fn load_critic(dir: &Path) -> Result<(Critic, Manifest)> {
    let (m, values) = load(dir, "critic")?;
    let ModelSpec::Critic { arch } = m.model else { bail!("{} is not a critic checkpoint", dir.display()) };
    Ok((Critic::from_values(arch, values)?, m))
}

pub fn save_classifier(
    dir: &Path,
    c: &DigitClassifier,
    clip_length: usize,
    config_hash: &str,
    seed: u64,
) -> Result<Manifest> {
    let model = ModelSpec::Classifier {
        arch: c.arch.clone(),
        spectrogram: c.spec,
        clip_length,
        num_classes: c.num_classes(),
        input_shape: c.input_shape,
        taps: c.tap_names(),
    };
    save(dir, &c.params, model, config_hash, seed)
}

pub fn load_classifier(dir: &Path) -> Result<(DigitClassifier, Manifest)> {
    let (m, values) = load(dir, "classifier")?;
    let ModelSpec::Classifier { arch, spectrogram, clip_length, .. } = m.model.clone() else {
        bail!("{} is not a classifier checkpoint", dir.display())
    };
    Ok((DigitClassifier::from_values(arch, spectrogram, clip_length, values)?, m))
}

pub fn save_mapper(
    dir: &Path,
    mapper: &InverseMapper,
    clip_length: usize,
    config_hash: &str,
    seed: u64,
) -> Result<Manifest> {
    let model = ModelSpec::Mapper {
        arch: mapper.arch.clone(),
        spectrogram: mapper.spec,
        clip_length,
        latent_dim: mapper.latent_dim(),
        input_shape: mapper.input_shape,
    };
    save(dir, &mapper.params, model, config_hash, seed)
}

pub fn load_mapper(dir: &Path) -> Result<(InverseMapper, Manifest)> {
    let (m, values) = load(dir, "inverter")?;
    let ModelSpec::Mapper { arch, spectrogram, clip_length, .. } = m.model.clone() else {
        bail!("{} is not an inverse-mapper checkpoint", dir.display())
    };
    Ok((InverseMapper::from_values(arch, spectrogram, clip_length, values)?, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generator_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let arch = GeneratorArch { latent_dim: 4, model_dim: 2, layers: 2 };
        let g = Generator::new(arch, &mut ChaCha8Rng::seed_from_u64(1));
        save_generator(dir.path(), &g, "h", 7).unwrap();
        let (back, m) = load_generator(dir.path()).unwrap();
        assert_eq!(back, g);
        assert_eq!((m.seed, m.config_hash.as_str()), (7, "h"));
        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
        assert_eq!(json["latent_dim"], 4);
        assert_eq!(json["output_length"], 256);
    }

    #[test]
    fn missing_and_corrupt_checkpoints_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_generator(&dir.path().join("nope")).unwrap_err().to_string();
        assert!(err.contains("missing gan checkpoint"), "{err}");
        let arch = GeneratorArch { latent_dim: 4, model_dim: 2, layers: 2 };
        save_generator(dir.path(), &Generator::new(arch, &mut ChaCha8Rng::seed_from_u64(1)), "h", 0).unwrap();
        let p = dir.path().join(PARAMS_FILE);
        let mut bytes = fs::read(&p).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 1;
        fs::write(&p, bytes).unwrap();
        assert!(load_generator(dir.path()).is_err());
    }
}
