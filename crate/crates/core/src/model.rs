//! Network model representation: dimensioned layer records and output-shape
//! resolution.
//!
//! A model is an ordered list of self-contained layer records. Every layer
//! declares its own input dimensions, so branch/concat topologies need no
//! graph support and records can be processed independently.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Layer taxonomy. Unrecognised kinds are carried verbatim as `Other`; they
/// parse and serialize but take no part in cost accounting.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LayerKind {
    Conv,
    DepthwiseConv,
    Fc,
    MaxPool,
    AvgPool,
    Other(String),
}

impl LayerKind {
    pub fn parse(s: &str) -> LayerKind {
        match s {
            "Conv" => LayerKind::Conv,
            "DepthwiseConv" => LayerKind::DepthwiseConv,
            "Fc" => LayerKind::Fc,
            "MaxPool" => LayerKind::MaxPool,
            "AvgPool" => LayerKind::AvgPool,
            other => LayerKind::Other(other.to_string()),
        }
    }

    pub fn label(&self) -> &str {
        match self {
            LayerKind::Conv => "Conv",
            LayerKind::DepthwiseConv => "DepthwiseConv",
            LayerKind::Fc => "Fc",
            LayerKind::MaxPool => "MaxPool",
            LayerKind::AvgPool => "AvgPool",
            LayerKind::Other(s) => s,
        }
    }

    /// Conv, DepthwiseConv and Fc: the kinds with kernel weights and a MAC cost.
    pub fn is_conv_family(&self) -> bool {
        matches!(
            self,
            LayerKind::Conv | LayerKind::DepthwiseConv | LayerKind::Fc
        )
    }

    pub fn is_pool(&self) -> bool {
        matches!(self, LayerKind::MaxPool | LayerKind::AvgPool)
    }
}

/// A (x, y, z) extent in elements; z is the channel count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub x: u64,
    pub y: u64,
    pub z: u64,
}

impl Dims {
    pub fn new(x: u64, y: u64, z: u64) -> Dims {
        Dims { x, y, z }
    }

    pub fn volume(&self) -> u64 {
        self.x * self.y * self.z
    }
}

/// One dimensioned layer record. `output` is `None` until shapes have been
/// resolved (or the document declared it).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub input: Dims,
    pub kernel: Option<(u64, u64)>,
    pub stride: u64,
    pub padding: u64,
    pub output_channels: u64,
    pub groups: u64,
    pub output: Option<Dims>,
}

impl LayerSpec {
    /// Convenience constructor for a standard convolution (groups = 1).
    pub fn conv(
        name: &str,
        input: (u64, u64, u64),
        kernel: (u64, u64),
        stride: u64,
        padding: u64,
        output_channels: u64,
    ) -> LayerSpec {
        LayerSpec {
            name: name.to_string(),
            kind: LayerKind::Conv,
            input: Dims::new(input.0, input.1, input.2),
            kernel: Some(kernel),
            stride,
            padding,
            output_channels,
            groups: 1,
            output: None,
        }
    }

    /// Convenience constructor for a pooling layer (channels preserved).
    pub fn pool(
        name: &str,
        kind: LayerKind,
        input: (u64, u64, u64),
        kernel: (u64, u64),
        stride: u64,
        padding: u64,
    ) -> LayerSpec {
        LayerSpec {
            name: name.to_string(),
            kind,
            input: Dims::new(input.0, input.1, input.2),
            kernel: Some(kernel),
            stride,
            padding,
            output_channels: input.2,
            groups: 1,
            output: None,
        }
    }

    /// Resolved output dims, or an error if `infer_shapes` has not run.
    pub fn resolved_output(&self) -> Result<Dims> {
        self.output
            .ok_or_else(|| Error::invalid(format!("layer '{}'", self.name), "unresolved shapes"))
    }
}

/// A named network: ordered layers plus free-form metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvNetModel {
    pub name: String,
    pub layers: Vec<LayerSpec>,
    pub metadata: BTreeMap<String, String>,
}

// ---------------------------------------------------------------------------
// JSON document schema
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct RawModel {
    name: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    metadata: BTreeMap<String, String>,
    layers: Vec<RawLayer>,
}

#[derive(Serialize, Deserialize)]
struct RawLayer {
    name: String,
    kind: String,
    input: [i64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kernel: Option<[i64; 2]>,
    #[serde(default = "default_stride")]
    stride: i64,
    #[serde(default)]
    pad: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    out_channels: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    groups: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    output: Option<[i64; 3]>,
}

fn default_stride() -> i64 {
    1
}

fn positive(context: &str, field: &str, v: i64) -> Result<u64> {
    if v <= 0 {
        return Err(Error::invalid(context, format!("non-positive {field}: {v}")));
    }
    Ok(v as u64)
}

fn non_negative(context: &str, field: &str, v: i64) -> Result<u64> {
    if v < 0 {
        return Err(Error::invalid(context, format!("negative {field}: {v}")));
    }
    Ok(v as u64)
}

fn validate_layer(index: usize, raw: &RawLayer) -> Result<LayerSpec> {
    let ctx = format!("layer {} ('{}')", index, raw.name);
    if raw.name.is_empty() {
        return Err(Error::invalid(&ctx, "empty layer name"));
    }
    let kind = LayerKind::parse(&raw.kind);

    let input = Dims::new(
        positive(&ctx, "input x", raw.input[0])?,
        positive(&ctx, "input y", raw.input[1])?,
        positive(&ctx, "input z", raw.input[2])?,
    );
    let stride = positive(&ctx, "stride", raw.stride)?;
    let padding = non_negative(&ctx, "pad", raw.pad)?;

    let kernel = match (&kind, raw.kernel) {
        (LayerKind::Other(_), k) => k
            .map(|k| -> Result<(u64, u64)> {
                Ok((
                    positive(&ctx, "kernel x", k[0])?,
                    positive(&ctx, "kernel y", k[1])?,
                ))
            })
            .transpose()?,
        (_, None) => {
            return Err(Error::invalid(&ctx, "missing kernel"));
        }
        (_, Some(k)) => Some((
            positive(&ctx, "kernel x", k[0])?,
            positive(&ctx, "kernel y", k[1])?,
        )),
    };

    if let Some((kx, ky)) = kernel {
        if kx > input.x + 2 * padding || ky > input.y + 2 * padding {
            return Err(Error::invalid(
                &ctx,
                format!(
                    "kernel {}x{} exceeds padded input {}x{}",
                    kx,
                    ky,
                    input.x + 2 * padding,
                    input.y + 2 * padding
                ),
            ));
        }
    }

    let output_channels = match (&kind, raw.out_channels) {
        (LayerKind::Conv | LayerKind::DepthwiseConv | LayerKind::Fc, None) => {
            return Err(Error::invalid(&ctx, "missing out_channels"));
        }
        (_, Some(v)) => {
            let oz = positive(&ctx, "out_channels", v)?;
            if kind.is_pool() && oz != input.z {
                return Err(Error::invalid(
                    &ctx,
                    format!(
                        "pooling out_channels {} must equal input channels {}",
                        oz, input.z
                    ),
                ));
            }
            oz
        }
        // Pooling and Other layers preserve channels by default.
        (_, None) => input.z,
    };

    let groups = match raw.groups {
        None => 1,
        Some(g) => positive(&ctx, "groups", g)?,
    };
    if groups > 1 {
        if !input.z.is_multiple_of(groups) {
            return Err(Error::invalid(
                &ctx,
                format!("groups {} does not divide input channels {}", groups, input.z),
            ));
        }
        if !output_channels.is_multiple_of(groups) {
            return Err(Error::invalid(
                &ctx,
                format!(
                    "groups {} does not divide output channels {}",
                    groups, output_channels
                ),
            ));
        }
    }

    let output = raw
        .output
        .map(|o| -> Result<Dims> {
            Ok(Dims::new(
                positive(&ctx, "output x", o[0])?,
                positive(&ctx, "output y", o[1])?,
                positive(&ctx, "output z", o[2])?,
            ))
        })
        .transpose()?;

    Ok(LayerSpec {
        name: raw.name.clone(),
        kind,
        input,
        kernel,
        stride,
        padding,
        output_channels,
        groups,
        output,
    })
}

/// Parse a model-spec document (JSON). Layers keep document order; all
/// numeric fields are range-checked. Output dims stay as declared (possibly
/// absent) until [`infer_shapes`] runs.
pub fn parse_model(spec_text: &str) -> Result<ConvNetModel> {
    let raw: RawModel = serde_json::from_str(spec_text).map_err(|e| {
        Error::syntax("<model-spec>", e.line() as u64, format!("{e}"))
    })?;

    let mut layers = Vec::with_capacity(raw.layers.len());
    let mut seen = BTreeSet::new();
    for (index, raw_layer) in raw.layers.iter().enumerate() {
        let layer = validate_layer(index, raw_layer)?;
        if !seen.insert(layer.name.clone()) {
            return Err(Error::invalid(
                format!("model '{}'", raw.name),
                format!("duplicate layer name '{}'", layer.name),
            ));
        }
        layers.push(layer);
    }

    Ok(ConvNetModel {
        name: raw.name,
        layers,
        metadata: raw.metadata,
    })
}

/// Load and parse a model-spec file.
pub fn load_model(path: impl AsRef<Path>) -> Result<ConvNetModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text).map_err(|e| match e {
        Error::Syntax { line, message, .. } => {
            Error::syntax(path.display().to_string(), line, message)
        }
        other => other,
    })
}

/// Serialize a model back to its JSON document form. Defaulted fields
/// (groups, pooling out_channels) are written explicitly, so the result
/// parses to an identical model.
pub fn serialize_model(model: &ConvNetModel) -> String {
    let raw = RawModel {
        name: model.name.clone(),
        metadata: model.metadata.clone(),
        layers: model
            .layers
            .iter()
            .map(|l| RawLayer {
                name: l.name.clone(),
                kind: l.kind.label().to_string(),
                input: [l.input.x as i64, l.input.y as i64, l.input.z as i64],
                kernel: l.kernel.map(|(kx, ky)| [kx as i64, ky as i64]),
                stride: l.stride as i64,
                pad: l.padding as i64,
                out_channels: Some(l.output_channels as i64),
                groups: Some(l.groups as i64),
                output: l.output.map(|o| [o.x as i64, o.y as i64, o.z as i64]),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&raw).expect("model serialization");
    text.push('\n');
    text
}

/// Spatial output extent: floor((input + 2*pad - kernel) / stride) + 1.
fn spatial_output(context: &str, input: u64, kernel: u64, padding: u64, stride: u64) -> Result<u64> {
    let padded = input + 2 * padding;
    if kernel > padded {
        return Err(Error::invalid(
            context,
            format!("kernel {kernel} exceeds padded input {padded}"),
        ));
    }
    Ok((padded - kernel) / stride + 1)
}

fn resolve_layer(layer: &LayerSpec) -> Result<Dims> {
    let ctx = format!("layer '{}'", layer.name);
    match &layer.kind {
        LayerKind::Conv | LayerKind::DepthwiseConv | LayerKind::MaxPool | LayerKind::AvgPool => {
            let (kx, ky) = layer
                .kernel
                .ok_or_else(|| Error::invalid(&ctx, "missing kernel"))?;
            Ok(Dims::new(
                spatial_output(&ctx, layer.input.x, kx, layer.padding, layer.stride)?,
                spatial_output(&ctx, layer.input.y, ky, layer.padding, layer.stride)?,
                layer.output_channels,
            ))
        }
        // Fully-connected output collapses to a single spatial position.
        LayerKind::Fc => Ok(Dims::new(1, 1, layer.output_channels)),
        // No cost model applies; keep declared dims or fall back to a
        // shape-preserving default (covers LRN, ReLU, Concat, ...).
        LayerKind::Other(_) => Ok(layer.output.unwrap_or(Dims::new(
            layer.input.x,
            layer.input.y,
            layer.output_channels,
        ))),
    }
}

/// Resolve output dims for every layer. Declared dims must agree with the
/// computed ones. Idempotent: resolving a resolved model changes nothing.
pub fn infer_shapes(mut model: ConvNetModel) -> Result<ConvNetModel> {
    for layer in &mut model.layers {
        let computed = resolve_layer(layer)?;
        if let Some(declared) = layer.output {
            if declared != computed {
                return Err(Error::invalid(
                    format!("layer '{}'", layer.name),
                    format!(
                        "declared output [{},{},{}] does not match computed [{},{},{}]",
                        declared.x, declared.y, declared.z, computed.x, computed.y, computed.z
                    ),
                ));
            }
        }
        layer.output = Some(computed);
    }
    Ok(model)
}
