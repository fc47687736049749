//! Label vocabularies and their fixed integer codes.
//!
//! Codes are part of every emitted artifact (one-hot vectors, joint labels,
//! confusion matrix axes) and must not be reordered.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

macro_rules! label_enum {
    ($(#[$meta:meta])* $name:ident, $kind:literal, [$($variant:ident = $code:literal => $text:literal),+ $(,)?]) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name {
            $($variant = $code),+
        }

        impl $name {
            pub const ALL: [$name; [$($code),+].len()] = [$($name::$variant),+];
            pub const COUNT: usize = Self::ALL.len();

            pub fn code(self) -> usize {
                self as usize
            }

            pub fn from_code(code: usize) -> Option<Self> {
                Self::ALL.get(code).copied()
            }

            pub fn name(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self, Error> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(Error::Parse { kind: $kind, value: s.to_string() }),
                }
            }
        }
    };
}

label_enum!(
    /// Tool used by the human partner.
    Tool, "tool", [
        Boomerang = 0 => "boomerang",
        Ruler = 1 => "ruler",
        Slingshot = 2 => "slingshot",
        Spatula = 3 => "spatula",
    ]
);

label_enum!(
    /// Manipulation applied to the object.
    Action, "action", [
        Push = 0 => "push",
        Pull = 1 => "pull",
        LeftToRight = 2 => "left_to_right",
        RightToLeft = 3 => "right_to_left",
    ]
);

label_enum!(
    CameraId, "camera", [
        Left = 0 => "left",
        Center = 1 => "center",
        Right = 2 => "right",
    ]
);

label_enum!(
    /// Capture time relative to the manipulation.
    Phase, "phase", [
        Initial = 0 => "initial",
        Final = 1 => "final",
    ]
);

/// One of the six captured views of a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ImageSlot {
    pub camera: CameraId,
    pub phase: Phase,
}

impl ImageSlot {
    /// All slots in canonical order: camera-major, initial before final.
    /// This is the channel order of stacked inputs and the order of
    /// separate inputs.
    pub const ALL: [ImageSlot; 6] = [
        ImageSlot::new(CameraId::Left, Phase::Initial),
        ImageSlot::new(CameraId::Left, Phase::Final),
        ImageSlot::new(CameraId::Center, Phase::Initial),
        ImageSlot::new(CameraId::Center, Phase::Final),
        ImageSlot::new(CameraId::Right, Phase::Initial),
        ImageSlot::new(CameraId::Right, Phase::Final),
    ];

    pub const CENTER: [ImageSlot; 2] = [
        ImageSlot::new(CameraId::Center, Phase::Initial),
        ImageSlot::new(CameraId::Center, Phase::Final),
    ];

    pub const fn new(camera: CameraId, phase: Phase) -> Self {
        ImageSlot { camera, phase }
    }

    pub fn index(self) -> usize {
        self.camera.code() * 2 + self.phase.code()
    }

    /// Manifest key, e.g. `center_final`.
    pub fn key(self) -> String {
        format!("{}_{}", self.camera, self.phase)
    }
}

impl fmt::Display for ImageSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.camera, self.phase)
    }
}

/// Number of joint (tool, action) classes.
pub const JOINT_CLASSES: usize = Tool::COUNT * Action::COUNT;

/// Joint class index `tool * 4 + action`.
pub fn encode_joint_label(tool: Tool, action: Action) -> usize {
    tool.code() * Action::COUNT + action.code()
}

pub fn decode_joint_label(label: usize) -> Option<(Tool, Action)> {
    if label >= JOINT_CLASSES {
        return None;
    }
    Some((
        Tool::from_code(label / Action::COUNT)?,
        Action::from_code(label % Action::COUNT)?,
    ))
}

/// One-hot action vector fed alongside the visual embedding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneHot4(pub [f32; 4]);

impl OneHot4 {
    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }
}

pub fn encode_action(action: Action) -> OneHot4 {
    let mut v = [0.0; 4];
    v[action.code()] = 1.0;
    OneHot4(v)
}
