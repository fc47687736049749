//! Residual encoders: basic blocks for depth 18, bottleneck blocks for 50
//! and 101, each ending in global average pooling.

use tch::nn::{self, ModuleT};
use tch::Tensor;

use super::config::Depth;
use crate::error::{Error, Result};

const STAGE_WIDTHS: [i64; 4] = [64, 128, 256, 512];
const BOTTLENECK_EXPANSION: i64 = 4;

const KAIMING_FAN_OUT: nn::Init = nn::Init::Kaiming {
    dist: nn::init::NormalOrUniform::Normal,
    fan: nn::init::FanInOut::FanOut,
    non_linearity: nn::init::NonLinearity::ReLU,
};

fn conv(p: nn::Path, c_in: i64, c_out: i64, k: i64, stride: i64, padding: i64) -> nn::Conv2D {
    let cfg = nn::ConvConfig {
        stride,
        padding,
        bias: false,
        ws_init: KAIMING_FAN_OUT,
        ..Default::default()
    };
    nn::conv2d(p, c_in, c_out, k, cfg)
}

fn bn(p: nn::Path, c: i64) -> nn::BatchNorm {
    let cfg = nn::BatchNormConfig {
        ws_init: nn::Init::Const(1.0),
        bs_init: nn::Init::Const(0.0),
        ..Default::default()
    };
    nn::batch_norm2d(p, c, cfg)
}

/// 1×1 projection used when a block changes resolution or width.
#[derive(Debug)]
pub struct Projection {
    conv: nn::Conv2D,
    bn: nn::BatchNorm,
}

#[derive(Debug)]
pub enum Block {
    Basic {
        conv1: nn::Conv2D,
        bn1: nn::BatchNorm,
        conv2: nn::Conv2D,
        bn2: nn::BatchNorm,
        projection: Option<Projection>,
    },
    Bottleneck {
        conv1: nn::Conv2D,
        bn1: nn::BatchNorm,
        conv2: nn::Conv2D,
        bn2: nn::BatchNorm,
        conv3: nn::Conv2D,
        bn3: nn::BatchNorm,
        projection: Option<Projection>,
    },
}

impl Block {
    fn basic(p: &nn::Path, c_in: i64, c_out: i64, stride: i64) -> Block {
        Block::Basic {
            conv1: conv(p / "conv1", c_in, c_out, 3, stride, 1),
            bn1: bn(p / "bn1", c_out),
            conv2: conv(p / "conv2", c_out, c_out, 3, 1, 1),
            bn2: bn(p / "bn2", c_out),
            projection: projection(p, c_in, c_out, stride),
        }
    }

    fn bottleneck(p: &nn::Path, c_in: i64, planes: i64, stride: i64) -> Block {
        let c_out = planes * BOTTLENECK_EXPANSION;
        Block::Bottleneck {
            conv1: conv(p / "conv1", c_in, planes, 1, 1, 0),
            bn1: bn(p / "bn1", planes),
            conv2: conv(p / "conv2", planes, planes, 3, stride, 1),
            bn2: bn(p / "bn2", planes),
            conv3: conv(p / "conv3", planes, c_out, 1, 1, 0),
            bn3: bn(p / "bn3", c_out),
            projection: projection(p, c_in, c_out, stride),
        }
    }

    /// The block input as it enters the skip connection.
    pub fn shortcut_t(&self, xs: &Tensor, train: bool) -> Tensor {
        let projection = match self {
            Block::Basic { projection, .. } | Block::Bottleneck { projection, .. } => projection,
        };
        match projection {
            Some(p) => xs.apply(&p.conv).apply_t(&p.bn, train),
            None => xs.shallow_clone(),
        }
    }

    pub fn residual_t(&self, xs: &Tensor, train: bool) -> Tensor {
        match self {
            Block::Basic {
                conv1,
                bn1,
                conv2,
                bn2,
                ..
            } => xs
                .apply(conv1)
                .apply_t(bn1, train)
                .relu()
                .apply(conv2)
                .apply_t(bn2, train),
            Block::Bottleneck {
                conv1,
                bn1,
                conv2,
                bn2,
                conv3,
                bn3,
                ..
            } => xs
                .apply(conv1)
                .apply_t(bn1, train)
                .relu()
                .apply(conv2)
                .apply_t(bn2, train)
                .relu()
                .apply(conv3)
                .apply_t(bn3, train),
        }
    }

    /// Zeroes the affine parameters of the last normalisation in the
    /// residual branch, which makes the branch output exactly zero.
    pub fn zero_residual(&mut self) {
        let last = match self {
            Block::Basic { bn2, .. } => bn2,
            Block::Bottleneck { bn3, .. } => bn3,
        };
        tch::no_grad(|| {
            if let Some(ws) = last.ws.as_mut() {
                let _ = ws.zero_();
            }
            if let Some(bs) = last.bs.as_mut() {
                let _ = bs.zero_();
            }
        });
    }
}

fn projection(p: &nn::Path, c_in: i64, c_out: i64, stride: i64) -> Option<Projection> {
    (stride != 1 || c_in != c_out).then(|| Projection {
        conv: conv(p / "downsample" / "conv", c_in, c_out, 1, stride, 0),
        bn: bn(p / "downsample" / "bn", c_out),
    })
}

impl ModuleT for Block {
    fn forward_t(&self, xs: &Tensor, train: bool) -> Tensor {
        (self.residual_t(xs, train) + self.shortcut_t(xs, train)).relu()
    }
}

/// Residual image encoder producing a flat embedding per input image.
#[derive(Debug)]
pub struct Encoder {
    stem: nn::Conv2D,
    stem_bn: nn::BatchNorm,
    stages: Vec<Vec<Block>>,
    depth: Depth,
    in_channels: usize,
}

impl Encoder {
    pub fn embedding_width(&self) -> usize {
        self.depth.embedding_width()
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn depth(&self) -> Depth {
        self.depth
    }

    pub fn stages(&self) -> &[Vec<Block>] {
        &self.stages
    }

    pub fn stages_mut(&mut self) -> &mut [Vec<Block>] {
        &mut self.stages
    }

    pub fn blocks(&self) -> impl Iterator<Item = &Block> {
        self.stages.iter().flatten()
    }

    /// Stem convolution, normalisation and max pooling.
    pub fn stem_t(&self, xs: &Tensor, train: bool) -> Tensor {
        xs.apply(&self.stem)
            .apply_t(&self.stem_bn, train)
            .relu()
            .max_pool2d([3, 3], [2, 2], [1, 1], [1, 1], false)
    }
}

impl ModuleT for Encoder {
    fn forward_t(&self, xs: &Tensor, train: bool) -> Tensor {
        let mut h = self.stem_t(xs, train);
        for block in self.stages.iter().flatten() {
            h = block.forward_t(&h, train);
        }
        h.adaptive_avg_pool2d([1, 1]).flatten(1, -1)
    }
}

pub fn build_backbone(
    p: &nn::Path,
    depth: Depth,
    first_kernel: u32,
    first_stride: u32,
    in_channels: usize,
) -> Result<Encoder> {
    if !super::config::FIRST_KERNELS.contains(&first_kernel) {
        return Err(Error::ModelConfig(format!(
            "first_kernel {first_kernel} not in {{3, 5, 7}}"
        )));
    }
    if !super::config::FIRST_STRIDES.contains(&first_stride) {
        return Err(Error::ModelConfig(format!(
            "first_stride {first_stride} not in {{1, 2}}"
        )));
    }
    if in_channels == 0 {
        return Err(Error::ModelConfig("in_channels must be positive".into()));
    }
    let k = i64::from(first_kernel);
    let stem = conv(
        p / "conv1",
        in_channels as i64,
        STAGE_WIDTHS[0],
        k,
        i64::from(first_stride),
        k / 2,
    );
    let stem_bn = bn(p / "bn1", STAGE_WIDTHS[0]);

    let mut c_in = STAGE_WIDTHS[0];
    let mut stages = Vec::with_capacity(4);
    for (s, (&width, &count)) in STAGE_WIDTHS.iter().zip(&depth.stage_blocks()).enumerate() {
        let sp = p / format!("layer{}", s + 1);
        let mut blocks = Vec::with_capacity(count);
        for b in 0..count {
            let stride = if s > 0 && b == 0 { 2 } else { 1 };
            let bp = &sp / b;
            let block = if depth.bottleneck() {
                let block = Block::bottleneck(&bp, c_in, width, stride);
                c_in = width * BOTTLENECK_EXPANSION;
                block
            } else {
                let block = Block::basic(&bp, c_in, width, stride);
                c_in = width;
                block
            };
            blocks.push(block);
        }
        stages.push(blocks);
    }
    debug_assert_eq!(c_in as usize, depth.embedding_width());
    Ok(Encoder {
        stem,
        stem_bn,
        stages,
        depth,
        in_channels,
    })
}
