use std::fmt;
use std::str::FromStr;

use crate::error::QuadstemError;

/// Stem identity: dialogue, singing-vocal music, instrumental music,
/// combined music, and effects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stem {
    Dx,
    MxV,
    MxI,
    /// Full music stem (vocals + instrumentals as one target).
    Mx,
    Fx,
}

impl Stem {
    /// Stable file-name token, e.g. `mx_v` for the MX-V stem.
    pub fn file_token(self) -> &'static str {
        match self {
            Stem::Dx => "dx",
            Stem::MxV => "mx_v",
            Stem::MxI => "mx_i",
            Stem::Mx => "mx",
            Stem::Fx => "fx",
        }
    }
}

impl fmt::Display for Stem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stem::Dx => "DX",
            Stem::MxV => "MX-V",
            Stem::MxI => "MX-I",
            Stem::Mx => "MX-*",
            Stem::Fx => "FX",
        };
        f.write_str(s)
    }
}

impl FromStr for Stem {
    type Err = QuadstemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "dx" => Ok(Stem::Dx),
            "mx_v" | "mxv" => Ok(Stem::MxV),
            "mx_i" | "mxi" => Ok(Stem::MxI),
            "mx" | "mx_*" | "mx_star" => Ok(Stem::Mx),
            "fx" => Ok(Stem::Fx),
            other => Err(QuadstemError::InvalidInput(format!("unknown stem '{other}'"))),
        }
    }
}

/// The three experimental setups. Each fixes the target stem list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetupKind {
    /// Mixture contains no singing vocals; targets DX, MX-I, FX.
    InstrumentalOnly,
    /// Vocals present, music rendered as one MX-* target; DX, MX-*, FX.
    CombinedMx,
    /// Four targets: DX, MX-V, MX-I, FX.
    SplitMx,
}

impl SetupKind {
    pub fn stems(self) -> Vec<Stem> {
        match self {
            SetupKind::InstrumentalOnly => vec![Stem::Dx, Stem::MxI, Stem::Fx],
            SetupKind::CombinedMx => vec![Stem::Dx, Stem::Mx, Stem::Fx],
            SetupKind::SplitMx => vec![Stem::Dx, Stem::MxV, Stem::MxI, Stem::Fx],
        }
    }

    /// Whether mixtures under this setup contain singing-vocal material.
    pub fn includes_vocals(self) -> bool {
        !matches!(self, SetupKind::InstrumentalOnly)
    }
}

impl fmt::Display for SetupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SetupKind::InstrumentalOnly => "inst",
            SetupKind::CombinedMx => "combined",
            SetupKind::SplitMx => "split",
        };
        f.write_str(s)
    }
}

impl FromStr for SetupKind {
    type Err = QuadstemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "inst" | "instrumental_only" | "instrumental-only" => Ok(SetupKind::InstrumentalOnly),
            "combined" | "combined_mx" => Ok(SetupKind::CombinedMx),
            "split" | "split_mx" => Ok(SetupKind::SplitMx),
            other => Err(QuadstemError::InvalidInput(format!("unknown setup '{other}'"))),
        }
    }
}

/// Source material classes drawn from the stem pools. Music sources are
/// split into vocal and instrumental layers; the combined MX stem is
/// rendered from both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StemClass {
    Dx,
    MxV,
    MxI,
    Fx,
}

impl fmt::Display for StemClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StemClass::Dx => "DX",
            StemClass::MxV => "MX-V",
            StemClass::MxI => "MX-I",
            StemClass::Fx => "FX",
        };
        f.write_str(s)
    }
}

impl FromStr for StemClass {
    type Err = QuadstemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "dx" => Ok(StemClass::Dx),
            "mx_v" | "mxv" => Ok(StemClass::MxV),
            "mx_i" | "mxi" => Ok(StemClass::MxI),
            "fx" => Ok(StemClass::Fx),
            other => Err(QuadstemError::InvalidInput(format!("unknown stem class '{other}'"))),
        }
    }
}
