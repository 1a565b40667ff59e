//! Data files compiled into the library.

use crate::aircraft::ReferenceIntensity;
use crate::demand::{parse_history, HistoryRow};
use crate::energymix::{parse_catalog, PathwaySpec};
use crate::fleet::MarketSplit;
use crate::store::{parse_background, ScenarioBackground, StoreError, TimeGrid};

const PATHWAYS: &str = include_str!("../../../data/pathways.csv");
const MARKET_SPLIT: &str = include_str!("../../../data/market_split.csv");
const REFERENCE_INTENSITY: &str = include_str!("../../../data/reference_intensity.csv");
const DEMAND_HISTORY: &str = include_str!("../../../data/demand_history.csv");

const BACKGROUNDS: [(&str, &str); 5] = [
    ("ssp1_19", include_str!("../../../data/backgrounds/ssp1_19.csv")),
    ("ssp2_19", include_str!("../../../data/backgrounds/ssp2_19.csv")),
    ("ssp2_26", include_str!("../../../data/backgrounds/ssp2_26.csv")),
    ("ssp2_34", include_str!("../../../data/backgrounds/ssp2_34.csv")),
    ("ssp5_45", include_str!("../../../data/backgrounds/ssp5_45.csv")),
];

pub fn pathway_catalog() -> Vec<PathwaySpec> {
    parse_catalog(PATHWAYS.as_bytes()).expect("bundled pathway catalog")
}

pub fn market_split() -> MarketSplit {
    MarketSplit::parse(MARKET_SPLIT.as_bytes()).expect("bundled market split")
}

pub fn reference_intensity() -> ReferenceIntensity {
    ReferenceIntensity::parse(REFERENCE_INTENSITY.as_bytes()).expect("bundled reference intensity")
}

pub fn demand_history() -> Vec<HistoryRow> {
    parse_history(DEMAND_HISTORY.as_bytes()).expect("bundled demand history")
}

pub fn background_labels() -> Vec<&'static str> {
    BACKGROUNDS.iter().map(|(l, _)| *l).collect()
}

/// Bundled background `label` resampled onto `grid`.
pub fn background(label: &str, grid: TimeGrid) -> Result<ScenarioBackground, StoreError> {
    let (_, text) = BACKGROUNDS
        .iter()
        .find(|(l, _)| *l == label)
        .ok_or_else(|| StoreError::Validation(format!("unknown bundled background `{label}`")))?;
    parse_background(text.as_bytes(), label, grid)
}
