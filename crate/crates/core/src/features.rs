//! Algorithmic cost features: MAC and weight counts, data volume, pooling op
//! counts, per-layer feature vectors and per-network layer-type aggregates.
//!
//! All counts are exact 64-bit integers; overflow is an error rather than a
//! wrap. Conversion to floating point happens only when a feature vector is
//! assembled for regression.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{ConvNetModel, LayerKind, LayerSpec};

/// Canonical per-layer feature order for conv-family layers.
pub const BASE_FEATURES: [&str; 12] = [
    "kernel",
    "padding",
    "stride",
    "Ix",
    "Ox",
    "Oz",
    "Iz",
    "input_volume",
    "output_volume",
    "weights",
    "data_volume",
    "MAC",
];

pub const MAC_SUM: &str = "MAC_sum";
pub const OP_SUM: &str = "Op_sum";

/// Where a feature vector came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FeatureOrigin {
    SingleLayer(String),
    LayerTypeAggregate(AggregateKind),
}

/// Layer-type buckets used for per-network aggregates. Depthwise-separable
/// convolutions count into the Conv bucket; the two pooling flavours stay
/// separate here and are only merged by the predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum AggregateKind {
    Conv,
    Fc,
    MaxPool,
    AvgPool,
}

impl AggregateKind {
    pub fn label(&self) -> &'static str {
        match self {
            AggregateKind::Conv => "Conv",
            AggregateKind::Fc => "Fc",
            AggregateKind::MaxPool => "MaxPool",
            AggregateKind::AvgPool => "AvgPool",
        }
    }

    /// Name of the single aggregate feature for this bucket.
    pub fn feature_name(&self) -> &'static str {
        match self {
            AggregateKind::Conv | AggregateKind::Fc => MAC_SUM,
            AggregateKind::MaxPool | AggregateKind::AvgPool => OP_SUM,
        }
    }
}

/// Named feature values with polynomial-degree metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    pub degree: u8,
    pub origin: FeatureOrigin,
}

impl FeatureVector {
    pub fn new(
        names: Vec<String>,
        values: Vec<f64>,
        degree: u8,
        origin: FeatureOrigin,
    ) -> Result<FeatureVector> {
        if names.len() != values.len() {
            return Err(Error::invalid(
                "feature vector",
                format!("{} names but {} values", names.len(), values.len()),
            ));
        }
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != names.len() {
            return Err(Error::invalid("feature vector", "duplicate feature names"));
        }
        Ok(FeatureVector {
            names,
            values,
            degree,
            origin,
        })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }
}

fn checked_product(context: &str, factors: &[u64]) -> Result<u64> {
    let mut acc: u64 = 1;
    for &f in factors {
        acc = acc
            .checked_mul(f)
            .ok_or_else(|| Error::invalid(context, "count overflow"))?;
    }
    Ok(acc)
}

fn checked_add(context: &str, a: u64, b: u64) -> Result<u64> {
    a.checked_add(b)
        .ok_or_else(|| Error::invalid(context, "count overflow"))
}

fn kernel_of(layer: &LayerSpec) -> Result<(u64, u64)> {
    layer
        .kernel
        .ok_or_else(|| Error::invalid(format!("layer '{}'", layer.name), "missing kernel"))
}

/// Multiply-accumulate count for a conv-family layer.
///
/// Standard convolution and fully-connected: Ox*Oy*Oz*Kx*Ky*(Iz/groups).
/// Depthwise-separable: Ox*Oy*Kx*Ky*Iz (per-channel spatial filter) plus
/// Iz*Oz*Ox*Oy (pointwise projection).
pub fn conv_macs(layer: &LayerSpec) -> Result<u64> {
    let ctx = format!("conv_macs('{}')", layer.name);
    let out = layer.resolved_output()?;
    let (kx, ky) = kernel_of(layer)?;
    match layer.kind {
        LayerKind::Conv | LayerKind::Fc => checked_product(
            &ctx,
            &[out.x, out.y, out.z, kx, ky, layer.input.z / layer.groups],
        ),
        LayerKind::DepthwiseConv => {
            let depthwise = checked_product(&ctx, &[out.x, out.y, kx, ky, layer.input.z])?;
            let pointwise = checked_product(&ctx, &[layer.input.z, out.z, out.x, out.y])?;
            checked_add(&ctx, depthwise, pointwise)
        }
        _ => Err(Error::invalid(
            ctx,
            format!("unsupported layer kind '{}'", layer.kind.label()),
        )),
    }
}

/// Kernel weight count (biases excluded).
pub fn conv_weights(layer: &LayerSpec) -> Result<u64> {
    let ctx = format!("conv_weights('{}')", layer.name);
    let (kx, ky) = kernel_of(layer)?;
    match layer.kind {
        LayerKind::Conv | LayerKind::Fc => checked_product(
            &ctx,
            &[kx, ky, layer.input.z / layer.groups, layer.output_channels],
        ),
        LayerKind::DepthwiseConv => {
            let depthwise = checked_product(&ctx, &[kx, ky, layer.input.z])?;
            let pointwise = checked_product(&ctx, &[layer.input.z, layer.output_channels])?;
            checked_add(&ctx, depthwise, pointwise)
        }
        _ => Err(Error::invalid(
            ctx,
            format!("unsupported layer kind '{}'", layer.kind.label()),
        )),
    }
}

/// Elements moved per layer application: input volume + weights + output volume.
pub fn data_volume(layer: &LayerSpec) -> Result<u64> {
    let ctx = format!("data_volume('{}')", layer.name);
    if !layer.kind.is_conv_family() {
        return Err(Error::invalid(
            ctx,
            format!("unsupported layer kind '{}'", layer.kind.label()),
        ));
    }
    let out = layer.resolved_output()?;
    let total = checked_add(&ctx, layer.input.volume(), conv_weights(layer)?)?;
    checked_add(&ctx, total, out.volume())
}

/// Comparison/accumulate op count for a pooling layer:
/// Ox*Oy*Oz*(Kx*Ky - 1). A 1x1 window yields 0.
pub fn pool_opcount(layer: &LayerSpec) -> Result<u64> {
    let ctx = format!("pool_opcount('{}')", layer.name);
    if !layer.kind.is_pool() {
        return Err(Error::invalid(
            ctx,
            format!("unsupported layer kind '{}'", layer.kind.label()),
        ));
    }
    let out = layer.resolved_output()?;
    let (kx, ky) = kernel_of(layer)?;
    let window = checked_product(&ctx, &[kx, ky])?;
    checked_product(&ctx, &[out.x, out.y, out.z, window - 1])
}

/// Expand named values to degree 2: the base vector as a prefix, then every
/// square ("a^2") and pairwise cross term ("a*b") in base order.
pub fn expand_degree2(names: &[String], values: &[f64]) -> (Vec<String>, Vec<f64>) {
    let n = names.len();
    let mut out_names = names.to_vec();
    let mut out_values = values.to_vec();
    out_names.reserve(n * (n + 1) / 2);
    out_values.reserve(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            if i == j {
                out_names.push(format!("{}^2", names[i]));
            } else {
                out_names.push(format!("{}*{}", names[i], names[j]));
            }
            out_values.push(values[i] * values[j]);
        }
    }
    (out_names, out_values)
}

/// The 12 base features of a conv-family layer (degree 1), or their 90-entry
/// degree-2 expansion.
pub fn layer_feature_vector(layer: &LayerSpec, degree: u8) -> Result<FeatureVector> {
    let ctx = format!("layer_feature_vector('{}')", layer.name);
    if !layer.kind.is_conv_family() {
        return Err(Error::invalid(
            ctx,
            format!("unsupported layer kind '{}'", layer.kind.label()),
        ));
    }
    if degree != 1 && degree != 2 {
        return Err(Error::invalid(ctx, format!("unsupported degree {degree}")));
    }
    let out = layer.resolved_output()?;
    let (kx, _ky) = kernel_of(layer)?;
    let weights = conv_weights(layer)?;
    let macs = conv_macs(layer)?;
    let input_volume = layer.input.volume();
    let output_volume = out.volume();
    let dv = data_volume(layer)?;

    let names: Vec<String> = BASE_FEATURES.iter().map(|s| s.to_string()).collect();
    let values: Vec<f64> = vec![
        kx as f64,
        layer.padding as f64,
        layer.stride as f64,
        layer.input.x as f64,
        out.x as f64,
        out.z as f64,
        layer.input.z as f64,
        input_volume as f64,
        output_volume as f64,
        weights as f64,
        dv as f64,
        macs as f64,
    ];

    let (names, values) = if degree == 2 {
        expand_degree2(&names, &values)
    } else {
        (names, values)
    };
    FeatureVector::new(names, values, degree, FeatureOrigin::SingleLayer(layer.name.clone()))
}

/// Per-network layer-type totals: summed MACs for Conv (incl. depthwise) and
/// Fc, summed pooling op counts for MaxPool and AvgPool. Kinds without any
/// supported layers are simply absent from the map.
pub fn network_layer_type_aggregate(
    model: &ConvNetModel,
) -> Result<BTreeMap<AggregateKind, FeatureVector>> {
    let mut sums: BTreeMap<AggregateKind, u64> = BTreeMap::new();
    for layer in &model.layers {
        let (bucket, count) = match layer.kind {
            LayerKind::Conv | LayerKind::DepthwiseConv => {
                (AggregateKind::Conv, conv_macs(layer)?)
            }
            LayerKind::Fc => (AggregateKind::Fc, conv_macs(layer)?),
            LayerKind::MaxPool => (AggregateKind::MaxPool, pool_opcount(layer)?),
            LayerKind::AvgPool => (AggregateKind::AvgPool, pool_opcount(layer)?),
            LayerKind::Other(_) => continue,
        };
        let entry = sums.entry(bucket).or_insert(0);
        *entry = checked_add("network aggregate", *entry, count)?;
    }

    let mut result = BTreeMap::new();
    for (bucket, sum) in sums {
        let vector = FeatureVector::new(
            vec![bucket.feature_name().to_string()],
            vec![sum as f64],
            1,
            FeatureOrigin::LayerTypeAggregate(bucket),
        )?;
        result.insert(bucket, vector);
    }
    Ok(result)
}
