use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::nn::ConvGeometry;

/// Network topology. The ablations drop the fusion block, the
/// suppression-to-refinement skips, or one of the two decoders.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    HdDemucs,
    DemucsBaseline,
    NoFusion,
    NoFusionNoSkip,
    SuppressionOnly,
    RefinementOnly,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::HdDemucs,
        Variant::DemucsBaseline,
        Variant::NoFusion,
        Variant::NoFusionNoSkip,
        Variant::SuppressionOnly,
        Variant::RefinementOnly,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::HdDemucs => "hd_demucs",
            Variant::DemucsBaseline => "demucs_baseline",
            Variant::NoFusion => "no_fusion",
            Variant::NoFusionNoSkip => "no_fusion_no_skip",
            Variant::SuppressionOnly => "suppression_only",
            Variant::RefinementOnly => "refinement_only",
        }
    }

    pub fn has_suppression(self) -> bool {
        !matches!(self, Variant::DemucsBaseline | Variant::RefinementOnly)
    }

    pub fn has_refinement(self) -> bool {
        !matches!(self, Variant::DemucsBaseline | Variant::SuppressionOnly)
    }

    pub fn has_fusion(self) -> bool {
        self == Variant::HdDemucs
    }

    /// Whether refinement blocks read the suppression decoder's summed
    /// inputs (true) or the encoder skips directly (false).
    pub fn refinement_reads_suppression(self) -> bool {
        matches!(self, Variant::HdDemucs | Variant::NoFusion)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown variant `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub hidden: usize,
    pub depth: usize,
    pub kernel: usize,
    pub stride: usize,
    pub resample_factor: usize,
    pub lstm_layers: usize,
    pub refinement_dilations: Vec<usize>,
    pub fusion_ch: usize,
    pub sample_rate: u32,
    pub variant: Variant,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: 48,
            depth: 5,
            kernel: 8,
            stride: 4,
            resample_factor: 4,
            lstm_layers: 2,
            refinement_dilations: vec![1, 3, 5, 7, 9],
            fusion_ch: 16,
            sample_rate: 16_000,
            variant: Variant::HdDemucs,
        }
    }
}

impl ModelConfig {
    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    /// A small configuration; dilations are the first `depth` odd numbers.
    pub fn tiny(hidden: usize, depth: usize, variant: Variant) -> Self {
        Self {
            hidden,
            depth,
            refinement_dilations: (0..depth).map(|i| 2 * i + 1).collect(),
            variant,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.hidden == 0 || self.depth == 0 || self.lstm_layers == 0 || self.fusion_ch == 0 {
            return bad("hidden, depth, lstm_layers and fusion_ch must be positive".into());
        }
        if self.stride == 0 || self.kernel < self.stride || !(self.kernel - self.stride).is_multiple_of(2) {
            return bad(format!(
                "kernel {} and stride {} must satisfy kernel >= stride with even difference",
                self.kernel, self.stride
            ));
        }
        if self.resample_factor != crate::dsp::RESAMPLE_FACTOR {
            return bad(format!(
                "resample_factor {} unsupported (only {})",
                self.resample_factor,
                crate::dsp::RESAMPLE_FACTOR
            ));
        }
        if self.refinement_dilations.len() != self.depth {
            return bad(format!(
                "{} refinement dilations for depth {}",
                self.refinement_dilations.len(),
                self.depth
            ));
        }
        for &d in &self.refinement_dilations {
            if d == 0 || !(d * (self.kernel - 1) + 1 - self.stride).is_multiple_of(2) {
                return bad(format!("dilation {d} does not give an exact x{} block", self.stride));
            }
        }
        if self.sample_rate == 0 {
            return bad("sample_rate must be positive".into());
        }
        Ok(())
    }

    /// Channels at encoder level `i`.
    pub fn channels(&self, level: usize) -> usize {
        self.hidden << level
    }

    /// Input lengths (before upsampling) must be multiples of this.
    pub fn valid_multiple(&self) -> usize {
        self.stride.pow(self.depth as u32)
    }

    pub fn padded_len(&self, len: usize) -> usize {
        len.div_ceil(self.valid_multiple()).max(1) * self.valid_multiple()
    }

    pub fn encoder_geometry(&self) -> ConvGeometry {
        ConvGeometry::new(self.stride, (self.kernel - self.stride) / 2, 1)
    }

    pub fn decoder_geometry(&self, dilation: usize) -> ConvGeometry {
        ConvGeometry::new(self.stride, (dilation * (self.kernel - 1) + 1 - self.stride) / 2, dilation)
    }

    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let dil: Vec<String> = self.refinement_dilations.iter().map(|d| d.to_string()).collect();
        [
            ("hidden", self.hidden.to_string()),
            ("depth", self.depth.to_string()),
            ("kernel", self.kernel.to_string()),
            ("stride", self.stride.to_string()),
            ("resample_factor", self.resample_factor.to_string()),
            ("lstm_layers", self.lstm_layers.to_string()),
            ("refinement_dilations", dil.join(",")),
            ("fusion_ch", self.fusion_ch.to_string()),
            ("sample_rate", self.sample_rate.to_string()),
            ("variant", self.variant.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    /// Applies one `key=value` setting; unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad value `{v}` for model.{key}")))
        }
        match key {
            "hidden" => self.hidden = num(key, value)?,
            "depth" => self.depth = num(key, value)?,
            "kernel" => self.kernel = num(key, value)?,
            "stride" => self.stride = num(key, value)?,
            "resample_factor" => self.resample_factor = num(key, value)?,
            "lstm_layers" => self.lstm_layers = num(key, value)?,
            "fusion_ch" => self.fusion_ch = num(key, value)?,
            "sample_rate" => self.sample_rate = num(key, value)?,
            "variant" => self.variant = value.trim().parse()?,
            "refinement_dilations" => {
                self.refinement_dilations =
                    value.split(',').map(|d| num(key, d)).collect::<Result<_>>()?
            }
            _ => return Err(Error::InvalidConfig(format!("unknown key model.{key}"))),
        }
        Ok(())
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut cfg = Self::default();
        for (k, v) in pairs {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One learnable array in the parameter layout.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    /// Zero for biases, which are initialised to zero.
    pub fan_in: usize,
}

impl ParamSpec {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }

    /// Top-level submodule (`encoder`, `lstm`, `suppression`, ...).
    pub fn module(&self) -> &str {
        self.name.split('.').next().unwrap_or("")
    }
}

fn push_conv(specs: &mut Vec<ParamSpec>, prefix: &str, c_out: usize, c_in: usize, k: usize) {
    specs.push(ParamSpec {
        name: format!("{prefix}.weight"),
        shape: vec![c_out, c_in, k],
        fan_in: c_in * k,
    });
    specs.push(ParamSpec {
        name: format!("{prefix}.bias"),
        shape: vec![c_out],
        fan_in: 0,
    });
}

fn push_decoder(specs: &mut Vec<ParamSpec>, cfg: &ModelConfig, name: &str) {
    for i in 0..cfg.depth {
        let level = cfg.depth - 1 - i;
        let c = cfg.channels(level);
        let c_out = if level == 0 { 1 } else { cfg.channels(level - 1) };
        push_conv(specs, &format!("{name}.{i}.pointwise"), 2 * c, c, 1);
        // Transposed weights are [in, out, k]; fan-in follows the
        // usual out * k convention for transposed layers.
        specs.push(ParamSpec {
            name: format!("{name}.{i}.tconv.weight"),
            shape: vec![c, c_out, cfg.kernel],
            fan_in: c_out * cfg.kernel,
        });
        specs.push(ParamSpec {
            name: format!("{name}.{i}.tconv.bias"),
            shape: vec![c_out],
            fan_in: 0,
        });
    }
}

/// Every learnable array of the configured variant, in a fixed order.
pub fn param_specs(cfg: &ModelConfig) -> Vec<ParamSpec> {
    let mut specs = Vec::new();
    for i in 0..cfg.depth {
        let c_in = if i == 0 { 1 } else { cfg.channels(i - 1) };
        let c = cfg.channels(i);
        push_conv(&mut specs, &format!("encoder.{i}.conv"), c, c_in, cfg.kernel);
        push_conv(&mut specs, &format!("encoder.{i}.pointwise"), 2 * c, c, 1);
    }
    let c = cfg.channels(cfg.depth - 1);
    for l in 0..cfg.lstm_layers {
        for (name, fan_in, shape) in [
            ("w_ih", c, vec![4 * c, c]),
            ("w_hh", c, vec![4 * c, c]),
            ("bias", 0, vec![4 * c]),
        ] {
            specs.push(ParamSpec {
                name: format!("lstm.{l}.{name}"),
                shape,
                fan_in,
            });
        }
    }
    let v = cfg.variant;
    if v == Variant::DemucsBaseline {
        push_decoder(&mut specs, cfg, "decoder");
    }
    if v.has_suppression() {
        push_decoder(&mut specs, cfg, "suppression");
    }
    if v.has_refinement() {
        push_decoder(&mut specs, cfg, "refinement");
    }
    if v.has_fusion() {
        push_conv(&mut specs, "fusion.0", cfg.fusion_ch, 2, 3);
        push_conv(&mut specs, "fusion.1", cfg.fusion_ch, cfg.fusion_ch, 3);
        push_conv(&mut specs, "fusion.2", 1, cfg.fusion_ch, 3);
    }
    specs
}

pub fn count_params(cfg: &ModelConfig) -> usize {
    param_specs(cfg).iter().map(ParamSpec::numel).sum()
}

/// Parameter count per top-level submodule.
pub fn count_by_module(cfg: &ModelConfig) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for s in param_specs(cfg) {
        *out.entry(s.module().to_string()).or_default() += s.numel();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_near_published_sizes() {
        let d48 = count_params(&ModelConfig::default().with_variant(Variant::DemucsBaseline));
        let d64 = count_params(&ModelConfig {
            hidden: 64,
            variant: Variant::DemucsBaseline,
            ..ModelConfig::default()
        });
        let hd = count_params(&ModelConfig::default());
        assert!((d48 as f64 - 18e6).abs() <= 1.8e6, "{d48}");
        assert!((d64 as f64 - 33e6).abs() <= 3.3e6, "{d64}");
        assert!((hd as f64 - 24e6).abs() <= 3.6e6, "{hd}");
    }

    #[test]
    fn hd_exceeds_baseline_by_refinement_and_fusion() {
        let cfg = ModelConfig::default();
        let by = count_by_module(&cfg);
        let base = count_params(&cfg.clone().with_variant(Variant::DemucsBaseline));
        assert_eq!(count_params(&cfg) - base, by["refinement"] + by["fusion"]);
    }

    #[test]
    fn decoder_geometry_multiplies_by_stride() {
        let cfg = ModelConfig::default();
        for &d in &cfg.refinement_dilations {
            let g = cfg.decoder_geometry(d);
            assert_eq!(g.padding, (7 * d - 3) / 2);
            assert_eq!(g.transpose_len(5, 8).unwrap(), 20);
        }
        assert_eq!(cfg.encoder_geometry().conv_len(4096, 8).unwrap(), 1024);
    }

    #[test]
    fn pairs_round_trip() {
        let cfg = ModelConfig::tiny(4, 3, Variant::NoFusionNoSkip);
        let pairs = cfg.to_pairs();
        let back = ModelConfig::from_pairs(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str()))).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = ModelConfig::default();
        assert!(cfg.set("width", "3").is_err());
        cfg.refinement_dilations = vec![1, 3];
        assert!(cfg.validate().is_err());
        cfg.refinement_dilations = vec![1, 3, 5, 7, 2];
        assert!(cfg.validate().is_err());
    }
}
