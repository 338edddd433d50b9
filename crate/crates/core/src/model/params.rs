use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::rng::Xorshift64Star;
use crate::tensor::{Scalar, Tensor};

use super::config::{BlockKind, ModelConfig};

/// Standard deviation of the truncated-normal weight initializer.
pub const INIT_STD: f64 = 0.02;

/// Named learnable tensors, iterated in lexicographic path order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore<T> {
    tensors: BTreeMap<String, Tensor<T>>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore {
            tensors: BTreeMap::new(),
        }
    }

    /// Inserts a tensor, replacing and returning any previous one.
    pub fn insert(&mut self, path: impl Into<String>, tensor: Tensor<T>) -> Option<Tensor<T>> {
        self.tensors.insert(path.into(), tensor)
    }

    pub fn get(&self, path: &str) -> Result<&Tensor<T>> {
        self.tensors
            .get(path)
            .ok_or_else(|| Error::config(format!("missing parameter {path}")))
    }

    pub fn get_mut(&mut self, path: &str) -> Option<&mut Tensor<T>> {
        self.tensors.get_mut(path)
    }

    pub fn contains(&self, path: &str) -> bool {
        self.tensors.contains_key(path)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<T>)> {
        self.tensors.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total number of scalar entries.
    pub fn numel(&self) -> usize {
        self.tensors.values().map(Tensor::numel).sum()
    }

    /// A store with the same paths and shapes, all zeros.
    pub fn zeros_like(&self) -> Self {
        ParamStore {
            tensors: self
                .tensors
                .iter()
                .map(|(k, v)| (k.clone(), v.zeros_like()))
                .collect(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        let mut out = ParamStore::new();
        for (k, v) in &self.tensors {
            out.insert(k.clone(), v.cast());
        }
        out
    }
}

impl<T> IntoIterator for ParamStore<T> {
    type Item = (String, Tensor<T>);
    type IntoIter = std::collections::btree_map::IntoIter<String, Tensor<T>>;

    fn into_iter(self) -> Self::IntoIter {
        self.tensors.into_iter()
    }
}

/// What a parameter is, for initialization and cost accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamRole {
    FcWeight,
    FcBias,
    NormGamma,
    NormBeta,
}

/// Which part of the network a parameter belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Embed,
    Block(usize),
    Head,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub path: String,
    pub shape: Vec<usize>,
    pub role: ParamRole,
    pub component: Component,
}

impl ParamSpec {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_fc(&self) -> bool {
        matches!(self.role, ParamRole::FcWeight | ParamRole::FcBias)
    }
}

/// Every parameter the configuration needs, in lexicographic path order.
pub fn param_specs(cfg: &ModelConfig) -> Vec<ParamSpec> {
    let mut specs = Vec::new();
    let c = cfg.hidden;
    let rc = cfg.ratio * cfg.hidden;
    let fc = |prefix: String, out: usize, inp: usize, component: Component| {
        [
            ParamSpec {
                path: format!("{prefix}.bias"),
                shape: vec![out],
                role: ParamRole::FcBias,
                component,
            },
            ParamSpec {
                path: format!("{prefix}.weight"),
                shape: vec![out, inp],
                role: ParamRole::FcWeight,
                component,
            },
        ]
    };
    let norm = |prefix: String, component: Component| {
        [
            ParamSpec {
                path: format!("{prefix}.beta"),
                shape: vec![c],
                role: ParamRole::NormBeta,
                component,
            },
            ParamSpec {
                path: format!("{prefix}.gamma"),
                shape: vec![c],
                role: ParamRole::NormGamma,
                component,
            },
        ]
    };

    specs.extend(fc("embed.fc".into(), c, cfg.patch_dim(), Component::Embed));
    specs.extend(norm("embed.norm".into(), Component::Embed));
    for i in 0..cfg.depth {
        let p = format!("block.{i}");
        let comp = Component::Block(i);
        specs.extend(norm(format!("{p}.norm1"), comp));
        specs.extend(norm(format!("{p}.norm2"), comp));
        match cfg.block {
            BlockKind::S2Mlp => {
                specs.extend(fc(format!("{p}.fc1"), c, c, comp));
                specs.extend(fc(format!("{p}.fc2"), c, c, comp));
                specs.extend(fc(format!("{p}.fc3"), rc, c, comp));
                specs.extend(fc(format!("{p}.fc4"), c, rc, comp));
            }
            BlockKind::Mixer => {
                let m = cfg.num_patches();
                let nbar = cfg.token_hidden();
                specs.extend(fc(format!("{p}.channel_fc1"), rc, c, comp));
                specs.extend(fc(format!("{p}.channel_fc2"), c, rc, comp));
                specs.extend(fc(format!("{p}.token_fc1"), nbar, m, comp));
                specs.extend(fc(format!("{p}.token_fc2"), m, nbar, comp));
            }
        }
    }
    specs.extend(fc("head".into(), cfg.classes, c, Component::Head));
    specs.sort_by(|a, b| a.path.cmp(&b.path));
    specs
}

/// Fresh parameters: fully-connected weights from a normal with std 0.02
/// truncated at ±2 std, biases 0, γ = 1, β = 0.
///
/// Each tensor draws from its own [`Xorshift64Star`] stream keyed by
/// `(seed, path)`.
pub fn init_params<T: Scalar>(cfg: &ModelConfig, seed: u64) -> Result<ParamStore<T>> {
    cfg.validate()?;
    let mut store = ParamStore::new();
    for spec in param_specs(cfg) {
        let tensor = match spec.role {
            ParamRole::FcWeight => {
                let mut rng = Xorshift64Star::for_stream(seed, &spec.path);
                Tensor::from_fn(&spec.shape, |_| {
                    T::from_f64(rng.truncated_normal(INIT_STD, 2.0))
                })?
            }
            ParamRole::FcBias | ParamRole::NormBeta => Tensor::zeros(&spec.shape)?,
            ParamRole::NormGamma => Tensor::full(&spec.shape, T::one())?,
        };
        store.insert(spec.path, tensor);
    }
    Ok(store)
}

/// Checks that `store` holds exactly the parameters `cfg` needs. The error
/// names the first offending path in canonical order.
pub fn check_store<T: Scalar>(cfg: &ModelConfig, store: &ParamStore<T>) -> Result<()> {
    let specs = param_specs(cfg);
    for spec in &specs {
        let t = store
            .get(&spec.path)
            .map_err(|_| Error::config(format!("parameter {} is missing", spec.path)))?;
        if t.shape() != spec.shape.as_slice() {
            return Err(Error::shape(format!(
                "parameter {} has shape {:?}, configuration needs {:?}",
                spec.path,
                t.shape(),
                spec.shape
            )));
        }
    }
    if store.len() != specs.len() {
        let extra = store
            .paths()
            .find(|p| !specs.iter().any(|s| s.path == *p))
            .unwrap_or("?");
        return Err(Error::config(format!(
            "parameter {extra} is not used by this configuration"
        )));
    }
    Ok(())
}
