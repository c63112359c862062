//! Coordinate MLPs with input feature maps and branched output heads.

mod arch;

use std::f64::consts::PI;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use arch::{Architecture, Branch};

use crate::error::{config, usage, Error, Result};
use crate::jets::{Activation, Jet, JetLayout, Tape, Var};
use crate::rng::{normal, Rng};

const TAU: f64 = 2.0 * PI;

/// First layer of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureMapKind {
    /// `tanh(W x + b)`
    StandardDense,
    /// `sin(2π(W x + b))`
    Sinusoidal,
    /// `[sin(2π(W x + b)), cos(2π(W x + b))]` with `W` of half the width.
    FourierPairs,
    /// [`FeatureMapKind::FourierPairs`] with `W` and `b` excluded from training.
    RandomFrozen,
    NoneDirect,
}

impl FeatureMapKind {
    fn paired(self) -> bool {
        matches!(self, FeatureMapKind::FourierPairs | FeatureMapKind::RandomFrozen)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitScheme {
    /// `N(0, 2 / (fan_in + fan_out))`
    Xavier,
    /// `N(0, 2 / fan_in)`
    He,
    /// `N(0, σ²)`
    Normal(f64),
}

impl InitScheme {
    pub fn std(&self, fan_in: usize, fan_out: usize) -> Result<f64> {
        match *self {
            InitScheme::Xavier => Ok((2.0 / (fan_in + fan_out) as f64).sqrt()),
            InitScheme::He => Ok((2.0 / fan_in as f64).sqrt()),
            InitScheme::Normal(s) if s >= 0.0 && s.is_finite() => Ok(s),
            InitScheme::Normal(s) => config(format!("initialization σ must be non-negative, got {s}")),
        }
    }
}

/// Row-major `fan_out × fan_in` weights drawn from `scheme` and zero biases.
pub fn init_layer(
    fan_in: usize,
    fan_out: usize,
    scheme: InitScheme,
    rng: &mut Rng,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if fan_in == 0 || fan_out == 0 {
        return config("layer fan-in and fan-out must be at least 1");
    }
    let std = scheme.std(fan_in, fan_out)?;
    let w = (0..fan_in * fan_out).map(|_| normal(rng, std)).collect();
    Ok((w, vec![0.0; fan_out]))
}

/// Feature vector for a single input point. `w1` is row-major with one row
/// per feature (half the output width for the paired maps).
pub fn feature_map_apply(kind: FeatureMapKind, w1: &[f64], b1: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    if kind == FeatureMapKind::NoneDirect {
        return Ok(x.to_vec());
    }
    let d = x.len();
    if d == 0 || w1.len() != b1.len() * d {
        return usage("feature weights do not match input and bias dimensions");
    }
    let z = w1
        .chunks_exact(d)
        .zip(b1)
        .map(|(row, b)| row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + b);
    Ok(match kind {
        FeatureMapKind::StandardDense => z.map(f64::tanh).collect(),
        FeatureMapKind::Sinusoidal => z.map(|z| (TAU * z).sin()).collect(),
        _ => {
            let z: Vec<f64> = z.map(|z| TAU * z).collect();
            z.iter().map(|z| z.sin()).chain(z.iter().map(|z| z.cos())).collect()
        }
    })
}

/// Network variants compared in the benchmark suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Standard,
    Sf,
    Ff,
    Rf,
    Siren,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Standard,
        Variant::Sf,
        Variant::Ff,
        Variant::Rf,
        Variant::Siren,
    ];

    pub fn feature_map(self) -> FeatureMapKind {
        match self {
            Variant::Standard => FeatureMapKind::StandardDense,
            Variant::Sf | Variant::Siren => FeatureMapKind::Sinusoidal,
            Variant::Ff => FeatureMapKind::FourierPairs,
            Variant::Rf => FeatureMapKind::RandomFrozen,
        }
    }

    pub fn activation(self) -> Activation {
        match self {
            Variant::Siren => Activation::Sin,
            _ => Activation::Tanh,
        }
    }

    pub fn init(self) -> InitScheme {
        match self {
            Variant::Siren => InitScheme::He,
            _ => InitScheme::Xavier,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Standard => "standard",
            Variant::Sf => "sf",
            Variant::Ff => "ff",
            Variant::Rf => "rf",
            Variant::Siren => "siren",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Usage(format!("unknown variant {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub inputs: Vec<String>,
    pub feature_map: FeatureMapKind,
    /// Output width of the feature layer; zero for [`FeatureMapKind::NoneDirect`].
    pub feature_width: usize,
    pub trunk: Vec<usize>,
    pub branches: Vec<Branch>,
    pub activation: Activation,
    pub init: InitScheme,
    pub feature_init: InitScheme,
}

impl NetworkConfig {
    /// The first width of `arch` is the feature layer unless `feature_map`
    /// is [`FeatureMapKind::NoneDirect`]. `sigma` overrides the feature
    /// layer initialization with `N(0, σ²)`.
    pub fn from_architecture(
        arch: &Architecture,
        feature_map: FeatureMapKind,
        activation: Activation,
        init: InitScheme,
        sigma: Option<f64>,
    ) -> Result<Self> {
        let (feature_width, trunk) = match feature_map {
            FeatureMapKind::NoneDirect => (0, arch.shared.clone()),
            _ => match arch.shared.split_first() {
                Some((&n, rest)) => (n, rest.to_vec()),
                None => return config("a feature map needs a first layer width"),
            },
        };
        let feature_init = match sigma {
            Some(s) => InitScheme::Normal(s),
            None => init,
        };
        let cfg = NetworkConfig {
            inputs: arch.inputs.clone(),
            feature_map,
            feature_width,
            trunk,
            branches: arch.branches.clone(),
            activation,
            init,
            feature_init,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn for_variant(arch: &str, variant: Variant, sigma: Option<f64>) -> Result<Self> {
        let arch = Architecture::parse(arch)?;
        Self::from_architecture(
            &arch,
            variant.feature_map(),
            variant.activation(),
            variant.init(),
            sigma,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs.is_empty() {
            return config("network needs at least one input");
        }
        if self.branches.is_empty() || self.branches.iter().any(|b| b.outputs.is_empty()) {
            return config("network needs at least one output branch");
        }
        let widths = self
            .trunk
            .iter()
            .chain(self.branches.iter().flat_map(|b| b.hidden.iter()));
        if widths.copied().any(|w| w == 0) {
            return config("layer widths must be at least 1");
        }
        if self.feature_map != FeatureMapKind::NoneDirect && self.feature_width == 0 {
            return config("feature width must be at least 1");
        }
        if self.feature_map.paired() && self.feature_width % 2 != 0 {
            return config(format!(
                "paired sin/cos features need an even width, got {}",
                self.feature_width
            ));
        }
        self.feature_init.std(1, 1)?;
        self.init.std(1, 1)?;
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.len()
    }

    pub fn output_names(&self) -> Vec<&str> {
        self.branches
            .iter()
            .flat_map(|b| b.outputs.iter().map(String::as_str))
            .collect()
    }

    pub fn architecture(&self) -> Architecture {
        let mut shared = Vec::new();
        if self.feature_map != FeatureMapKind::NoneDirect {
            shared.push(self.feature_width);
        }
        shared.extend_from_slice(&self.trunk);
        Architecture {
            inputs: self.inputs.clone(),
            shared,
            branches: self.branches.clone(),
        }
    }
}

/// Location of one dense layer inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerView {
    pub weights: Range<usize>,
    pub bias: Range<usize>,
    pub fan_in: usize,
    pub fan_out: usize,
    pub trainable: bool,
}

#[derive(Debug, Clone)]
struct BranchLayers {
    hidden: Vec<LayerView>,
    output: LayerView,
}

/// A [`NetworkConfig`] with its parameter layout resolved.
#[derive(Debug, Clone)]
pub struct Network {
    config: NetworkConfig,
    feature: Option<LayerView>,
    trunk: Vec<LayerView>,
    branches: Vec<BranchLayers>,
    weight_count: usize,
}

/// Flat parameter vector with a trainable mask and named scalars stored
/// after the network weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    pub values: Vec<f64>,
    pub trainable: Vec<bool>,
    scalars: Vec<(String, usize)>,
}

impl ParameterSet {
    pub fn new(values: Vec<f64>, trainable: Vec<bool>) -> Result<Self> {
        if values.len() != trainable.len() {
            return usage("trainable mask length differs from parameter count");
        }
        Ok(ParameterSet {
            values,
            trainable,
            scalars: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn push_scalar(&mut self, name: &str, value: f64, trainable: bool) -> usize {
        let index = self.values.len();
        self.values.push(value);
        self.trainable.push(trainable);
        self.scalars.push((name.to_string(), index));
        index
    }

    pub fn scalar_index(&self, name: &str) -> Option<usize> {
        self.scalars.iter().find(|s| s.0 == name).map(|s| s.1)
    }

    pub fn scalar(&self, name: &str) -> Option<f64> {
        self.scalar_index(name).map(|i| self.values[i])
    }

    pub fn scalars(&self) -> impl Iterator<Item = (&str, f64)> {
        self.scalars.iter().map(|(n, i)| (n.as_str(), self.values[*i]))
    }

    pub fn view(&self, range: Range<usize>) -> &[f64] {
        &self.values[range]
    }
}

/// Network parameters bound as leaves of a [`Tape`].
pub struct BoundParams<'t> {
    feature: Option<(Var<'t>, Var<'t>)>,
    trunk: Vec<(Var<'t>, Var<'t>)>,
    branches: Vec<(Vec<(Var<'t>, Var<'t>)>, (Var<'t>, Var<'t>))>,
}

/// Output fields of a jet-batch forward pass.
pub struct Outputs<'t> {
    tape: &'t Tape,
    layout: JetLayout,
    points: usize,
    names: Vec<String>,
    fields: Vec<(Var<'t>, usize)>,
}

impl<'t> Outputs<'t> {
    pub fn layout(&self) -> &JetLayout {
        &self.layout
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn field_index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Usage(format!("no output named {name:?}")))
    }

    /// Derivative `d^order / d(input dim)^order` of output `field` at every point.
    pub fn deriv(&self, field: usize, dim: usize, order: usize) -> Result<Var<'t>> {
        let (var, row) = *self
            .fields
            .get(field)
            .ok_or_else(|| Error::Usage(format!("output index {field} out of range")))?;
        self.tape
            .derivative(var, &self.layout, self.points, row, dim, order)
    }

    pub fn value(&self, field: usize) -> Result<Var<'t>> {
        self.deriv(field, 0, 0)
    }

    /// Raw jet batch of output `field`'s branch and its row.
    pub fn raw(&self, field: usize) -> (Var<'t>, usize) {
        self.fields[field]
    }
}

fn dense(offset: &mut usize, fan_in: usize, fan_out: usize, trainable: bool) -> LayerView {
    let w = *offset..*offset + fan_in * fan_out;
    let b = w.end..w.end + fan_out;
    *offset = b.end;
    LayerView {
        weights: w,
        bias: b,
        fan_in,
        fan_out,
        trainable,
    }
}

/// Points per chunk in plain batch evaluation.
const EVAL_CHUNK: usize = 4096;

impl Network {
    pub fn new(config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        let d = config.input_dim();
        let mut offset = 0;
        let (feature, mut width) = match config.feature_map {
            FeatureMapKind::NoneDirect => (None, d),
            kind => {
                let rows = if kind.paired() {
                    config.feature_width / 2
                } else {
                    config.feature_width
                };
                let trainable = kind != FeatureMapKind::RandomFrozen;
                (Some(dense(&mut offset, d, rows, trainable)), config.feature_width)
            }
        };
        let mut trunk = Vec::new();
        for &w in &config.trunk {
            trunk.push(dense(&mut offset, width, w, true));
            width = w;
        }
        let trunk_width = width;
        let mut branches = Vec::new();
        for b in &config.branches {
            let mut width = trunk_width;
            let mut hidden = Vec::new();
            for &w in &b.hidden {
                hidden.push(dense(&mut offset, width, w, true));
                width = w;
            }
            let output = dense(&mut offset, width, b.outputs.len(), true);
            branches.push(BranchLayers { hidden, output });
        }
        Ok(Network {
            config,
            feature,
            trunk,
            branches,
            weight_count: offset,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    /// Number of network weights and biases (excluding physics scalars).
    pub fn weight_count(&self) -> usize {
        self.weight_count
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim()
    }

    pub fn output_names(&self) -> Vec<&str> {
        self.config.output_names()
    }

    pub fn output_count(&self) -> usize {
        self.config.branches.iter().map(|b| b.outputs.len()).sum()
    }

    pub fn feature_layer(&self) -> Option<&LayerView> {
        self.feature.as_ref()
    }

    /// All dense layers in parameter order, feature layer first.
    pub fn layers(&self) -> Vec<&LayerView> {
        let mut out: Vec<&LayerView> = self.feature.iter().chain(&self.trunk).collect();
        for b in &self.branches {
            out.extend(b.hidden.iter());
            out.push(&b.output);
        }
        out
    }

    /// Fresh parameters: feature layer from the feature scheme, every other
    /// layer from the hidden scheme, all biases zero.
    pub fn init(&self, rng: &mut Rng) -> Result<ParameterSet> {
        let mut values = vec![0.0; self.weight_count];
        let mut trainable = vec![true; self.weight_count];
        for (i, layer) in self.layers().into_iter().enumerate() {
            let scheme = if i == 0 && self.feature.is_some() {
                self.config.feature_init
            } else {
                self.config.init
            };
            let (w, _) = init_layer(layer.fan_in, layer.fan_out, scheme, rng)?;
            values[layer.weights.clone()].copy_from_slice(&w);
            if !layer.trainable {
                trainable[layer.weights.start..layer.bias.end].fill(false);
            }
        }
        ParameterSet::new(values, trainable)
    }

    pub fn bind<'t>(&self, tape: &'t Tape) -> Result<BoundParams<'t>> {
        if tape.param_count() < self.weight_count {
            return usage(format!(
                "tape holds {} parameters, network needs {}",
                tape.param_count(),
                self.weight_count
            ));
        }
        let leaf = |l: &LayerView| -> Result<(Var<'t>, Var<'t>)> {
            Ok((
                tape.param(l.weights.start, l.weights.len())?,
                tape.param(l.bias.start, l.bias.len())?,
            ))
        };
        Ok(BoundParams {
            feature: self.feature.as_ref().map(leaf).transpose()?,
            trunk: self.trunk.iter().map(leaf).collect::<Result<_>>()?,
            branches: self
                .branches
                .iter()
                .map(|b| {
                    Ok((
                        b.hidden.iter().map(leaf).collect::<Result<Vec<_>>>()?,
                        leaf(&b.output)?,
                    ))
                })
                .collect::<Result<_>>()?,
        })
    }

    /// Forward pass over a jet batch of inputs (as built by
    /// [`Tape::seed_inputs`] with the same `layout`).
    pub fn apply<'t>(
        &self,
        tape: &'t Tape,
        params: &BoundParams<'t>,
        inputs: Var<'t>,
        layout: &JetLayout,
    ) -> Result<Outputs<'t>> {
        let d = self.input_dim();
        let slots = layout.slots();
        if inputs.len() % (d * slots) != 0 {
            return usage("input batch does not match input dimension and jet layout");
        }
        let points = inputs.len() / (d * slots);
        let act = self.config.activation;

        let mut h = inputs;
        let mut width = d;
        if let (Some(view), Some((w, b))) = (&self.feature, &params.feature) {
            let z = tape.affine(*w, Some(*b), h, view.fan_out, d, slots)?;
            h = match self.config.feature_map {
                FeatureMapKind::StandardDense => tape.activate(z, Activation::Tanh, layout)?,
                FeatureMapKind::Sinusoidal => tape.activate(z * TAU, Activation::Sin, layout)?,
                _ => {
                    let z = z * TAU;
                    let s = tape.activate(z, Activation::Sin, layout)?;
                    let c = tape.activate(z, Activation::Cos, layout)?;
                    tape.concat_rows(s, c)
                }
            };
            width = self.config.feature_width;
        }
        for (view, (w, b)) in self.trunk.iter().zip(&params.trunk) {
            let z = tape.affine(*w, Some(*b), h, view.fan_out, width, slots)?;
            h = tape.activate(z, act, layout)?;
            width = view.fan_out;
        }

        let mut names = Vec::new();
        let mut fields = Vec::new();
        for ((layers, (hidden, (wo, bo))), spec) in self
            .branches
            .iter()
            .zip(&params.branches)
            .zip(&self.config.branches)
        {
            let mut g = h;
            let mut gw = width;
            for (view, (w, b)) in layers.hidden.iter().zip(hidden) {
                let z = tape.affine(*w, Some(*b), g, view.fan_out, gw, slots)?;
                g = tape.activate(z, act, layout)?;
                gw = view.fan_out;
            }
            let out = tape.affine(*wo, Some(*bo), g, layers.output.fan_out, gw, slots)?;
            for (row, name) in spec.outputs.iter().enumerate() {
                names.push(name.clone());
                fields.push((out, row));
            }
        }
        Ok(Outputs {
            tape,
            layout: layout.clone(),
            points,
            names,
            fields,
        })
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() < self.weight_count {
            return usage(format!(
                "{} parameters supplied, network needs {}",
                params.len(),
                self.weight_count
            ));
        }
        Ok(())
    }

    /// Plain outputs at one point, in output-name order.
    pub fn forward(&self, params: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return usage(format!(
                "input has {} coordinates, network expects {}",
                x.len(),
                self.input_dim()
            ));
        }
        self.forward_batch(params, x)
    }

    /// Plain outputs for row-major `[point][dim]` inputs, returned as
    /// row-major `[point][output]`.
    pub fn forward_batch(&self, params: &[f64], points: &[f64]) -> Result<Vec<f64>> {
        self.check_params(params)?;
        let d = self.input_dim();
        if points.len() % d != 0 {
            return usage("point buffer is not a multiple of the input dimension");
        }
        let m = self.output_count();
        let mut out = Vec::with_capacity(points.len() / d * m);
        let layout = JetLayout::values();
        for chunk in points.chunks(EVAL_CHUNK * d) {
            let n = chunk.len() / d;
            let tape = Tape::new(&params[..self.weight_count]);
            let bound = self.bind(&tape)?;
            let x = tape.seed_inputs(chunk, d, &layout)?;
            let o = self.apply(&tape, &bound, x, &layout)?;
            let cols: Vec<Vec<f64>> = (0..m)
                .map(|f| o.value(f).map(|v| v.value()))
                .collect::<Result<_>>()?;
            for p in 0..n {
                out.extend(cols.iter().map(|c| c[p]));
            }
        }
        Ok(out)
    }

    /// Output jets at one point along input `seeded_dim`.
    pub fn forward_with_jets(
        &self,
        params: &[f64],
        x: &[f64],
        seeded_dim: usize,
        order: usize,
    ) -> Result<Vec<Jet>> {
        self.check_params(params)?;
        let d = self.input_dim();
        if x.len() != d {
            return usage("input dimension mismatch");
        }
        if seeded_dim >= d {
            return usage(format!("seeded dimension {seeded_dim} out of range"));
        }
        let layout = JetLayout::single(seeded_dim, order)?;
        let tape = Tape::new(&params[..self.weight_count]);
        let bound = self.bind(&tape)?;
        let input = tape.seed_inputs(x, d, &layout)?;
        let o = self.apply(&tape, &bound, input, &layout)?;
        (0..self.output_count())
            .map(|f| {
                let (var, row) = o.raw(f);
                let slots = layout.slots();
                let v = tape.value(var.id());
                let cell = &v[row * slots..(row + 1) * slots];
                Jet::from_coeffs(cell)
            })
            .collect()
    }
}
