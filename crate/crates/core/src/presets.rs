//! Built-in run configurations.

use crate::config::{parse_config, RunConfig};
use crate::error::{Error, Result};

pub const PRESETS: [(&str, &str); 5] = [
    ("equilibrium", include_str!("../presets/equilibrium.json5")),
    ("precession", include_str!("../presets/precession.json5")),
    ("interlayer", include_str!("../presets/interlayer.json5")),
    ("regularized", include_str!("../presets/regularized.json5")),
    ("moser", include_str!("../presets/moser.json5")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn preset(name: &str) -> Result<RunConfig> {
    let text = preset_text(name).ok_or_else(|| {
        let known: Vec<_> = names().collect();
        Error::config("preset", format!("unknown preset {name:?}, expected one of {known:?}"))
    })?;
    parse_config(text)
}
