//! Figure experiments, read from an embedded table.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use huygens_core::classify::ObservedRegime;
use huygens_core::dynamics::ModelKind;
use serde::{Deserialize, Serialize};

use crate::config::ParamSet;

/// The embedded table, as shipped.
pub const FIGURES_TOML: &str = include_str!("../data/figures.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FigureId {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
}

impl FigureId {
    pub const ALL: [FigureId; 6] =
        [FigureId::Fig2, FigureId::Fig3, FigureId::Fig4, FigureId::Fig5, FigureId::Fig6, FigureId::Fig7];

    pub fn name(self) -> &'static str {
        match self {
            FigureId::Fig2 => "fig2",
            FigureId::Fig3 => "fig3",
            FigureId::Fig4 => "fig4",
            FigureId::Fig5 => "fig5",
            FigureId::Fig6 => "fig6",
            FigureId::Fig7 => "fig7",
        }
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FigureId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        FigureId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| format!("unknown figure {s:?}; expected one of fig2..fig7"))
    }
}

/// Second panel of a figure plot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Panel {
    /// θ₁ + θ₂
    Sum,
    /// θ₁ − θ₂
    Difference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FigurePreset {
    pub id: FigureId,
    pub title: String,
    pub model: ModelKind,
    pub panel: Panel,
    pub cycles: f64,
    pub theta1_0: f64,
    pub theta2_0: f64,
    #[serde(default)]
    pub expected: Option<ObservedRegime>,
    /// Whether beats precede settling; unchecked when absent.
    #[serde(default)]
    pub beats: Option<bool>,
    pub params: ParamSet,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FigureTable {
    version: u32,
    figure: Vec<FigurePreset>,
}

fn table() -> &'static FigureTable {
    static TABLE: OnceLock<FigureTable> = OnceLock::new();
    TABLE.get_or_init(|| toml::from_str(FIGURES_TOML).expect("embedded figure table parses"))
}

pub fn table_version() -> u32 {
    table().version
}

pub fn presets() -> &'static [FigurePreset] {
    &table().figure
}

pub fn preset(id: FigureId) -> &'static FigurePreset {
    presets().iter().find(|p| p.id == id).expect("every figure id has a preset")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_id_present_once() {
        assert_eq!(table_version(), 1);
        for id in FigureId::ALL {
            assert_eq!(presets().iter().filter(|p| p.id == id).count(), 1, "{id}");
            assert_eq!(id.name().parse::<FigureId>().unwrap(), id);
        }
    }

    #[test]
    fn caption_values_resolve() {
        let p = preset(FigureId::Fig6);
        match p.params {
            ParamSet::Physical(ph) => {
                assert_eq!((ph.big_m, ph.c, ph.k), (9.716, 9.716, 9.716));
                assert_eq!(ph.epsilon, Some(0.134));
            }
            other => panic!("{other:?}"),
        }
        assert!(p.params.resolve(p.model, 2).is_ok());
    }
}
