//! Run files compiled into the binary so `jmpower validate table1` works
//! from any directory.

pub const PRESETS: &[(&str, &str)] = &[
    ("table1", include_str!("../../../presets/table1.toml")),
    ("table2", include_str!("../../../presets/table2.toml")),
    ("table3", include_str!("../../../presets/table3.toml")),
    ("table4", include_str!("../../../presets/table4.toml")),
    ("figure1", include_str!("../../../presets/figure1.toml")),
    ("figure2", include_str!("../../../presets/figure2.toml")),
    ("figure3", include_str!("../../../presets/figure3.toml")),
    ("figure4", include_str!("../../../presets/figure4.toml")),
    ("type1", include_str!("../../../presets/type1.toml")),
    ("simulate", include_str!("../../../presets/simulate.toml")),
];

pub fn lookup(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}
