//! Conversion of INP flow-unit systems to the internal ft / cfs basis.

use crate::error::{Error, Result};

const FT_M: f64 = 0.3048;
const CUBIC_FT_M3: f64 = FT_M * FT_M * FT_M;
const US_GALLON_M3: f64 = 231.0 * 0.0254 * 0.0254 * 0.0254;
const IMPERIAL_GALLON_M3: f64 = 0.004_546_09;
const ACRE_FT_FT3: f64 = 43_560.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowUnits {
    Cfs,
    Gpm,
    Mgd,
    Imgd,
    Afd,
    Lps,
    Lpm,
    Mld,
    Cmh,
    Cmd,
}

impl FlowUnits {
    pub fn parse(token: &str) -> Result<Self> {
        Ok(match token.to_ascii_uppercase().as_str() {
            "CFS" => Self::Cfs,
            "GPM" => Self::Gpm,
            "MGD" => Self::Mgd,
            "IMGD" => Self::Imgd,
            "AFD" => Self::Afd,
            "LPS" => Self::Lps,
            "LPM" => Self::Lpm,
            "MLD" => Self::Mld,
            "CMH" => Self::Cmh,
            "CMD" => Self::Cmd,
            other => return Err(Error::Unsupported(format!("flow units '{other}'"))),
        })
    }

    /// SI systems use metres and millimetres; US systems feet and inches.
    pub fn is_metric(self) -> bool {
        matches!(
            self,
            Self::Lps | Self::Lpm | Self::Mld | Self::Cmh | Self::Cmd
        )
    }

    /// Multiplier taking a flow in these units to cubic feet per second.
    pub fn to_cfs(self) -> f64 {
        let m3s_to_cfs = 1.0 / CUBIC_FT_M3;
        match self {
            Self::Cfs => 1.0,
            Self::Gpm => US_GALLON_M3 / 60.0 * m3s_to_cfs,
            Self::Mgd => 1.0e6 * US_GALLON_M3 / 86_400.0 * m3s_to_cfs,
            Self::Imgd => 1.0e6 * IMPERIAL_GALLON_M3 / 86_400.0 * m3s_to_cfs,
            Self::Afd => ACRE_FT_FT3 / 86_400.0,
            Self::Lps => 1.0e-3 * m3s_to_cfs,
            Self::Lpm => 1.0e-3 / 60.0 * m3s_to_cfs,
            Self::Mld => 1.0e3 / 86_400.0 * m3s_to_cfs,
            Self::Cmh => 1.0 / 3_600.0 * m3s_to_cfs,
            Self::Cmd => 1.0 / 86_400.0 * m3s_to_cfs,
        }
    }

    /// Multiplier for elevations, heads and pipe lengths.
    pub fn length_to_ft(self) -> f64 {
        if self.is_metric() {
            1.0 / FT_M
        } else {
            1.0
        }
    }

    /// Multiplier for pipe and valve diameters (mm or inches).
    pub fn diameter_to_ft(self) -> f64 {
        if self.is_metric() {
            1.0e-3 / FT_M
        } else {
            1.0 / 12.0
        }
    }
}
