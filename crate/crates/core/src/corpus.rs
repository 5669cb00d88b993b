//! Bundled fixtures: the ATM and ordering-system models with their event
//! overlays and scenarios, and a sample sequence diagram.

use crate::dsl::parse_model_named;
use crate::events::{parse_overlay_named, EventOverlay};
use crate::model::StaticModel;
use crate::sd::{parse_sd_named, SdDoc};
use crate::sim::{parse_scenario_named, Scenario};

pub const ATM_TM: &str = include_str!("../corpus/atm.tm");
pub const ATM_EV: &str = include_str!("../corpus/atm.ev");
pub const ATM_HAPPY: &str = include_str!("../corpus/atm_happy.scn");
pub const ATM_CARD_INVALID: &str = include_str!("../corpus/atm_card_invalid.scn");
pub const ATM_INSUFFICIENT: &str = include_str!("../corpus/atm_insufficient.scn");
pub const ORDERING_TM: &str = include_str!("../corpus/ordering.tm");
pub const ORDERING_EV: &str = include_str!("../corpus/ordering.ev");
pub const ORDERING_RETRY: &str = include_str!("../corpus/ordering_retry.scn");
pub const ORDERING_HAPPY: &str = include_str!("../corpus/ordering_happy.scn");
pub const WITHDRAW_SD: &str = include_str!("../corpus/withdraw.sd");

/// Every bundled file, by file name.
pub const FILES: [(&str, &str); 10] = [
    ("atm.tm", ATM_TM),
    ("atm.ev", ATM_EV),
    ("atm_happy.scn", ATM_HAPPY),
    ("atm_card_invalid.scn", ATM_CARD_INVALID),
    ("atm_insufficient.scn", ATM_INSUFFICIENT),
    ("ordering.tm", ORDERING_TM),
    ("ordering.ev", ORDERING_EV),
    ("ordering_retry.scn", ORDERING_RETRY),
    ("ordering_happy.scn", ORDERING_HAPPY),
    ("withdraw.sd", WITHDRAW_SD),
];

pub fn atm() -> StaticModel {
    parse_model_named(ATM_TM, "atm.tm").expect("bundled atm.tm parses")
}

pub fn atm_overlay(model: &StaticModel) -> EventOverlay {
    parse_overlay_named(ATM_EV, model, "atm.ev").expect("bundled atm.ev parses")
}

pub fn ordering() -> StaticModel {
    parse_model_named(ORDERING_TM, "ordering.tm").expect("bundled ordering.tm parses")
}

pub fn ordering_overlay(model: &StaticModel) -> EventOverlay {
    parse_overlay_named(ORDERING_EV, model, "ordering.ev").expect("bundled ordering.ev parses")
}

pub fn scenario(text: &str) -> Scenario {
    parse_scenario_named(text, "scenario").expect("bundled scenario parses")
}

pub fn withdraw() -> SdDoc {
    parse_sd_named(WITHDRAW_SD, "withdraw.sd").expect("bundled withdraw.sd parses")
}
