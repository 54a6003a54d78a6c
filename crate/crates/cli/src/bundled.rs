//! Scenarios shipped with the binary, with their committed reports.

pub struct Bundled {
    pub name: &'static str,
    pub source: &'static str,
    /// Normalized report at seed 0.
    pub expected: &'static str,
}

macro_rules! bundled {
    ($name:literal) => {
        Bundled {
            name: $name,
            source: include_str!(concat!("../scenarios/", $name, ".toml")),
            expected: include_str!(concat!("../scenarios/expected/", $name, ".json")),
        }
    };
}

pub const BUNDLED: &[Bundled] = &[bundled!("ac_filament"), bundled!("sab_pulse"), bundled!("pl_dispute")];

pub fn find(name: &str) -> Option<&'static Bundled> {
    BUNDLED.iter().find(|b| b.name == name)
}
