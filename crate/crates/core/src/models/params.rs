use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::models::{ModelConfig, ModelKind};
use crate::numerics::{Real, Rng, Tensor};
use crate::FEATURE_DIM;

/// How a parameter tensor is initialized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
    Glorot { fan_in: usize, fan_out: usize },
    Zeros,
    Ones,
    /// Zeros except the forget-gate block `[hidden, 2·hidden)`, set to 1.
    LstmBias { hidden: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

impl ParamSpec {
    fn new(name: impl Into<String>, shape: &[usize], init: Init) -> Self {
        Self {
            name: name.into(),
            shape: shape.to_vec(),
            init,
        }
    }

    fn dense(name: &str, fan_in: usize, fan_out: usize) -> Self {
        Self::new(name, &[fan_in, fan_out], Init::Glorot { fan_in, fan_out })
    }
}

pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Every parameter the configured architecture owns, in a fixed order.
pub fn param_specs(config: &ModelConfig) -> Vec<ParamSpec> {
    let k = config.num_classes;
    match config.kind {
        ModelKind::ConvLstm => {
            let (f, h) = (config.conv_filters, config.lstm_units);
            vec![
                ParamSpec::new("conv.kernel", &[3, 3, 1, f], Init::Glorot { fan_in: 9, fan_out: 9 * f }),
                ParamSpec::new("conv.bias", &[f], Init::Zeros),
                ParamSpec::dense("lstm.w_ih", FEATURE_DIM * f, 4 * h),
                ParamSpec::dense("lstm.w_hh", h, 4 * h),
                ParamSpec::new("lstm.bias", &[4 * h], Init::LstmBias { hidden: h }),
                ParamSpec::dense("head.weight", h, k),
                ParamSpec::new("head.bias", &[k], Init::Zeros),
            ]
        }
        ModelKind::Transformer => {
            let (d, ff) = (config.model_dim, config.ffn_dim);
            let mut specs = vec![
                ParamSpec::dense("input.weight", FEATURE_DIM, d),
                ParamSpec::new("input.bias", &[d], Init::Zeros),
            ];
            for l in 0..config.layers {
                let p = |s: &str| format!("layer{l}.{s}");
                for proj in ["q", "k", "v", "o"] {
                    specs.push(ParamSpec::dense(&p(&format!("attn.w{proj}")), d, d));
                    specs.push(ParamSpec::new(p(&format!("attn.b{proj}")), &[d], Init::Zeros));
                }
                specs.push(ParamSpec::new(p("ln1.gain"), &[d], Init::Ones));
                specs.push(ParamSpec::new(p("ln1.shift"), &[d], Init::Zeros));
                specs.push(ParamSpec::dense(&p("ffn.w1"), d, ff));
                specs.push(ParamSpec::new(p("ffn.b1"), &[ff], Init::Zeros));
                specs.push(ParamSpec::dense(&p("ffn.w2"), ff, d));
                specs.push(ParamSpec::new(p("ffn.b2"), &[d], Init::Zeros));
                specs.push(ParamSpec::new(p("ln2.gain"), &[d], Init::Ones));
                specs.push(ParamSpec::new(p("ln2.shift"), &[d], Init::Zeros));
            }
            specs.push(ParamSpec::dense("head.weight", d, k));
            specs.push(ParamSpec::new("head.bias", &[k], Init::Zeros));
            specs
        }
    }
}

/// `(name, shape)` pairs derived from the config alone.
pub fn shape_manifest(config: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    param_specs(config).into_iter().map(|s| (s.name, s.shape)).collect()
}

/// Named parameter tensors for one configured model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T = f32> {
    config: ModelConfig,
    seed: u64,
    names: Vec<String>,
    tensors: Vec<Tensor<T>>,
    index: HashMap<String, usize>,
}

impl<T: Real> ModelParams<T> {
    /// Assembles parameters, checking names and shapes against the config.
    pub fn from_tensors(config: ModelConfig, seed: u64, named: Vec<(String, Tensor<T>)>) -> Result<Self> {
        config.validate()?;
        let expected = shape_manifest(&config);
        if expected.len() != named.len() {
            return Err(Error::Format(format!(
                "config implies {} parameter tensors, got {}",
                expected.len(),
                named.len()
            )));
        }
        for ((name, shape), (got_name, t)) in expected.iter().zip(&named) {
            if name != got_name || shape.as_slice() != t.shape() {
                return Err(Error::Format(format!(
                    "parameter {got_name} {:?} does not match expected {name} {shape:?}",
                    t.shape()
                )));
            }
        }
        let (names, tensors): (Vec<_>, Vec<_>) = named.into_iter().unzip();
        let index = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        Ok(Self {
            config,
            seed,
            names,
            tensors,
            index,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn kind(&self) -> ModelKind {
        self.config.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor<T>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.tensors
    }

    pub fn index_of(&self, name: &str) -> usize {
        *self
            .index
            .get(name)
            .unwrap_or_else(|| panic!("no parameter named {name}"))
    }

    pub fn get(&self, name: &str) -> &Tensor<T> {
        &self.tensors[self.index_of(name)]
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Tensor<T> {
        let i = self.index_of(name);
        &mut self.tensors[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    /// Total scalar parameter count.
    pub fn count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn shape_manifest(&self) -> Vec<(String, Vec<usize>)> {
        self.iter().map(|(n, t)| (n.to_string(), t.shape().to_vec())).collect()
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        ModelParams {
            config: self.config.clone(),
            seed: self.seed,
            names: self.names.clone(),
            tensors: self.tensors.iter().map(Tensor::cast).collect(),
            index: self.index.clone(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }

    /// Zero tensors matching every parameter.
    pub fn zeros_like(&self) -> Vec<Tensor<T>> {
        self.tensors.iter().map(|t| Tensor::zeros(t.shape())).collect()
    }
}

/// Draws parameters: Glorot-uniform weights, zero biases, unit layer-norm
/// gains, LSTM forget-gate bias 1. Each tensor has its own child stream
/// keyed by name, so adding a tensor never perturbs the others.
pub fn init_params<T: Real>(config: &ModelConfig, rng: &Rng) -> Result<ModelParams<T>> {
    config.validate()?;
    let named = param_specs(config)
        .into_iter()
        .map(|spec| {
            let mut stream = rng.split(&format!("init/{}", spec.name));
            let n: usize = spec.shape.iter().product();
            let values: Vec<T> = match spec.init {
                Init::Glorot { fan_in, fan_out } => {
                    let bound = glorot_bound(fan_in, fan_out);
                    (0..n).map(|_| T::of(stream.uniform_range(-bound, bound))).collect()
                }
                Init::Zeros => vec![T::zero(); n],
                Init::Ones => vec![T::one(); n],
                Init::LstmBias { hidden } => (0..n)
                    .map(|i| if (hidden..2 * hidden).contains(&i) { T::one() } else { T::zero() })
                    .collect(),
            };
            Ok((spec.name, Tensor::new(spec.shape, values)?))
        })
        .collect::<Result<Vec<_>>>()?;
    ModelParams::from_tensors(config.clone(), rng.seed(), named)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(kind: ModelKind) -> ModelConfig {
        ModelConfig {
            kind,
            num_classes: 5,
            conv_filters: 4,
            lstm_units: 8,
            layers: 2,
            heads: 4,
            model_dim: 16,
            ffn_dim: 32,
            ..Default::default()
        }
    }

    #[test]
    fn same_seed_same_params() {
        for kind in ModelKind::ALL {
            let a = init_params::<f32>(&tiny(kind), &Rng::new(42, "m")).unwrap();
            let b = init_params::<f32>(&tiny(kind), &Rng::new(42, "m")).unwrap();
            assert_eq!(a, b);
            let c = init_params::<f32>(&tiny(kind), &Rng::new(43, "m")).unwrap();
            assert_ne!(a, c);
        }
    }

    #[test]
    fn manifest_matches_config() {
        let p = init_params::<f64>(&tiny(ModelKind::ConvLstm), &Rng::new(1, "m")).unwrap();
        assert_eq!(
            p.shape_manifest(),
            vec![
                ("conv.kernel".to_string(), vec![3, 3, 1, 4]),
                ("conv.bias".to_string(), vec![4]),
                ("lstm.w_ih".to_string(), vec![252, 32]),
                ("lstm.w_hh".to_string(), vec![8, 32]),
                ("lstm.bias".to_string(), vec![32]),
                ("head.weight".to_string(), vec![8, 5]),
                ("head.bias".to_string(), vec![5]),
            ]
        );
        let t = init_params::<f64>(&tiny(ModelKind::Transformer), &Rng::new(1, "m")).unwrap();
        assert_eq!(t.shape_manifest(), shape_manifest(t.config()));
        assert_eq!(t.names().len(), 2 + 2 * 16 + 2);
        assert_eq!(t.get("layer1.ffn.w1").shape(), &[16, 32]);
    }

    #[test]
    fn glorot_bound_for_input_projection() {
        let bound = glorot_bound(63, 512);
        assert!((bound - 0.102_150_5).abs() < 1e-6, "{bound}");
        let cfg = ModelConfig { kind: ModelKind::Transformer, layers: 1, ..Default::default() };
        let p = init_params::<f32>(&cfg, &Rng::new(42, "m")).unwrap();
        let w = p.get("input.weight");
        assert!(w.data().iter().all(|&v| (v as f64).abs() <= bound));
        let max = w.data().iter().fold(0.0f32, |m, v| m.max(v.abs())) as f64;
        assert!(max > 0.9 * bound);
    }

    #[test]
    fn biases_gains_and_forget_gate() {
        let p = init_params::<f32>(&tiny(ModelKind::ConvLstm), &Rng::new(1, "m")).unwrap();
        let b = p.get("lstm.bias").data();
        assert!(b[..8].iter().all(|&v| v == 0.0));
        assert!(b[8..16].iter().all(|&v| v == 1.0));
        assert!(b[16..].iter().all(|&v| v == 0.0));
        assert!(p.get("head.bias").data().iter().all(|&v| v == 0.0));
        let t = init_params::<f32>(&tiny(ModelKind::Transformer), &Rng::new(1, "m")).unwrap();
        assert!(t.get("layer0.ln1.gain").data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn from_tensors_rejects_wrong_shapes() {
        let p = init_params::<f32>(&tiny(ModelKind::ConvLstm), &Rng::new(1, "m")).unwrap();
        let mut named: Vec<_> = p.iter().map(|(n, t)| (n.to_string(), t.clone())).collect();
        named[1].1 = Tensor::zeros(&[5]);
        assert!(matches!(
            ModelParams::from_tensors(p.config().clone(), 1, named),
            Err(Error::Format(_))
        ));
    }
}
