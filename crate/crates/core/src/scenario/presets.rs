//! Scenario presets shipped with the crate.
//!
//! All presets use the same 9-agent topology, with observer and leader on
//! agent 5.

pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    pub text: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "consensus-fig2",
        summary: "consensus, fault (2,1) on agent 7 at k=8, detection only",
        text: include_str!("../../presets/consensus-fig2.toml"),
    },
    Preset {
        name: "consensus-accommodation",
        summary: "consensus, fault (2,1) on agent 8 at k=8, leader holds the centroid",
        text: include_str!("../../presets/consensus-accommodation.toml"),
    },
    Preset {
        name: "formation-recovery",
        summary: "formation, fault (2,1) on agent 7 at k=45, centroid recovered to the origin",
        text: include_str!("../../presets/formation-recovery.toml"),
    },
    Preset {
        name: "fault-free",
        summary: "consensus from random positions, no fault",
        text: include_str!("../../presets/fault-free.toml"),
    },
];

pub fn preset(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

pub fn names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.name).collect()
}
