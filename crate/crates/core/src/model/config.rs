use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::ImageSlot;
use crate::error::{Error, Result};

/// How the six views of a trial are routed through encoders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FusionVariant {
    /// All six views stacked into one 18-channel input, one encoder.
    #[serde(rename = "stacked_3C1N", alias = "3C-1N")]
    Stacked3C1N,
    /// Six views, six independent encoders.
    #[serde(rename = "separate_3C6N", alias = "3C-6N")]
    Separate3C6N,
    /// Center initial/final, two independent encoders.
    #[serde(rename = "separate_central_1C2N", alias = "1C-2N")]
    SeparateCentral1C2N,
    /// Six views, one encoder per camera applied to initial and final.
    #[serde(rename = "shared_3C3N", alias = "3C-3N")]
    Shared3C3N,
    /// Center initial/final through a single shared encoder.
    #[serde(rename = "shared_central_1C1N", alias = "1C-1N")]
    SharedCentral1C1N,
}

impl FusionVariant {
    pub const ALL: [FusionVariant; 5] = [
        FusionVariant::Stacked3C1N,
        FusionVariant::Separate3C6N,
        FusionVariant::Shared3C3N,
        FusionVariant::SeparateCentral1C2N,
        FusionVariant::SharedCentral1C1N,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FusionVariant::Stacked3C1N => "stacked_3C1N",
            FusionVariant::Separate3C6N => "separate_3C6N",
            FusionVariant::SeparateCentral1C2N => "separate_central_1C2N",
            FusionVariant::Shared3C3N => "shared_3C3N",
            FusionVariant::SharedCentral1C1N => "shared_central_1C1N",
        }
    }

    /// Camera/network code such as `1C-1N`.
    pub fn code(self) -> &'static str {
        match self {
            FusionVariant::Stacked3C1N => "3C-1N",
            FusionVariant::Separate3C6N => "3C-6N",
            FusionVariant::SeparateCentral1C2N => "1C-2N",
            FusionVariant::Shared3C3N => "3C-3N",
            FusionVariant::SharedCentral1C1N => "1C-1N",
        }
    }

    /// Views consumed, in input order.
    pub fn slots(self) -> &'static [ImageSlot] {
        match self {
            FusionVariant::SeparateCentral1C2N | FusionVariant::SharedCentral1C1N => {
                &ImageSlot::CENTER
            }
            _ => &ImageSlot::ALL,
        }
    }

    /// Number of input tensors in a batch.
    pub fn input_count(self) -> usize {
        match self {
            FusionVariant::Stacked3C1N => 1,
            other => other.slots().len(),
        }
    }

    pub fn in_channels(self) -> usize {
        match self {
            FusionVariant::Stacked3C1N => 3 * ImageSlot::ALL.len(),
            _ => 3,
        }
    }

    pub fn encoder_count(self) -> usize {
        match self {
            FusionVariant::Stacked3C1N | FusionVariant::SharedCentral1C1N => 1,
            FusionVariant::Separate3C6N => 6,
            FusionVariant::SeparateCentral1C2N => 2,
            FusionVariant::Shared3C3N => 3,
        }
    }

    /// Encoder that processes input `i`.
    pub fn encoder_for_input(self, i: usize) -> usize {
        match self {
            FusionVariant::Stacked3C1N | FusionVariant::SharedCentral1C1N => 0,
            FusionVariant::Separate3C6N | FusionVariant::SeparateCentral1C2N => i,
            FusionVariant::Shared3C3N => i / 2,
        }
    }

    pub fn shares_weights(self) -> bool {
        matches!(
            self,
            FusionVariant::Shared3C3N | FusionVariant::SharedCentral1C1N
        )
    }

    /// Names of the batch inputs, used in shape errors.
    pub fn input_names(self) -> Vec<String> {
        match self {
            FusionVariant::Stacked3C1N => vec!["stacked".to_string()],
            other => other.slots().iter().map(|s| s.key()).collect(),
        }
    }
}

impl fmt::Display for FusionVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FusionVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FusionVariant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s) || v.code().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parse {
                kind: "variant",
                value: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HeadKind {
    Tool,
    Action,
    Joint,
}

impl HeadKind {
    pub fn classes(self) -> usize {
        match self {
            HeadKind::Tool | HeadKind::Action => 4,
            HeadKind::Joint => 16,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            HeadKind::Tool => "tool",
            HeadKind::Action => "action",
            HeadKind::Joint => "joint",
        }
    }
}

/// Output layout of the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadMode {
    /// 4-way tool from images only.
    Tool,
    /// 4-way tool with the one-hot action appended to the embedding.
    ToolWithAction,
    /// 4-way tool and 4-way action heads on a shared trunk.
    Dual,
    /// 4-way action only.
    Action,
    /// 16-way joint (tool, action) class.
    Joint16,
}

impl HeadMode {
    pub const ALL: [HeadMode; 5] = [
        HeadMode::Tool,
        HeadMode::ToolWithAction,
        HeadMode::Dual,
        HeadMode::Action,
        HeadMode::Joint16,
    ];

    pub fn heads(self) -> &'static [HeadKind] {
        match self {
            HeadMode::Tool | HeadMode::ToolWithAction => &[HeadKind::Tool],
            HeadMode::Dual => &[HeadKind::Tool, HeadKind::Action],
            HeadMode::Action => &[HeadKind::Action],
            HeadMode::Joint16 => &[HeadKind::Joint],
        }
    }

    pub fn uses_action_input(self) -> bool {
        self == HeadMode::ToolWithAction
    }

    pub fn name(self) -> &'static str {
        match self {
            HeadMode::Tool => "tool",
            HeadMode::ToolWithAction => "tool_with_action",
            HeadMode::Dual => "dual",
            HeadMode::Action => "action",
            HeadMode::Joint16 => "joint16",
        }
    }
}

impl fmt::Display for HeadMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HeadMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        HeadMode::ALL
            .into_iter()
            .find(|h| h.name() == s)
            .ok_or_else(|| Error::Parse {
                kind: "head mode",
                value: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum Depth {
    R18,
    R50,
    R101,
}

impl Depth {
    pub const ALL: [Depth; 3] = [Depth::R18, Depth::R50, Depth::R101];

    pub fn layers(self) -> u32 {
        match self {
            Depth::R18 => 18,
            Depth::R50 => 50,
            Depth::R101 => 101,
        }
    }

    /// Blocks per stage.
    pub fn stage_blocks(self) -> [usize; 4] {
        match self {
            Depth::R18 => [2, 2, 2, 2],
            Depth::R50 => [3, 4, 6, 3],
            Depth::R101 => [3, 4, 23, 3],
        }
    }

    pub fn bottleneck(self) -> bool {
        self != Depth::R18
    }

    pub fn embedding_width(self) -> usize {
        if self.bottleneck() {
            2048
        } else {
            512
        }
    }
}

impl TryFrom<u32> for Depth {
    type Error = Error;

    fn try_from(v: u32) -> Result<Self> {
        match v {
            18 => Ok(Depth::R18),
            50 => Ok(Depth::R50),
            101 => Ok(Depth::R101),
            other => Err(Error::ModelConfig(format!(
                "depth {other} not in {{18, 50, 101}}"
            ))),
        }
    }
}

impl From<Depth> for u32 {
    fn from(d: Depth) -> u32 {
        d.layers()
    }
}

impl fmt::Display for Depth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.layers())
    }
}

pub const FIRST_KERNELS: [u32; 3] = [3, 5, 7];
pub const FIRST_STRIDES: [u32; 2] = [1, 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub depth: Depth,
    pub variant: FusionVariant,
    pub head: HeadMode,
    #[serde(default = "default_kernel")]
    pub first_kernel: u32,
    #[serde(default = "default_stride")]
    pub first_stride: u32,
    /// Hidden width of the classifier; `None` means a single linear layer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head_hidden: Option<usize>,
}

fn default_kernel() -> u32 {
    7
}

fn default_stride() -> u32 {
    2
}

impl ModelConfig {
    pub fn new(depth: Depth, variant: FusionVariant, head: HeadMode) -> Self {
        ModelConfig {
            depth,
            variant,
            head,
            first_kernel: default_kernel(),
            first_stride: default_stride(),
            head_hidden: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !FIRST_KERNELS.contains(&self.first_kernel) {
            return Err(Error::ModelConfig(format!(
                "first_kernel {} not in {{3, 5, 7}}",
                self.first_kernel
            )));
        }
        if !FIRST_STRIDES.contains(&self.first_stride) {
            return Err(Error::ModelConfig(format!(
                "first_stride {} not in {{1, 2}}",
                self.first_stride
            )));
        }
        if self.head_hidden == Some(0) {
            return Err(Error::ModelConfig("head_hidden must be positive".into()));
        }
        Ok(())
    }

    /// Width of the concatenated embedding fed to the heads, excluding the
    /// one-hot action.
    pub fn feature_width(&self) -> usize {
        self.variant.input_count() * self.depth.embedding_width()
    }
}
