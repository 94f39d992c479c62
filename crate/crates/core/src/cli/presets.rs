//! Built-in scenarios, embedded at compile time.

pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    pub json: &'static str,
}

macro_rules! preset {
    ($name:literal, $summary:literal) => {
        Preset {
            name: $name,
            summary: $summary,
            json: include_str!(concat!("../../presets/", $name, ".json")),
        }
    };
}

pub const PRESETS: &[Preset] = &[
    preset!(
        "theorem3_regulation",
        "2R, no gravity, dominant M_n, smoothed step: converges"
    ),
    preset!(
        "theorem2_circle",
        "2R vertical arm tracking a 0.2 m circle: ultimately bounded"
    ),
    preset!(
        "fig4a_unstable",
        "2R regulation with a tiny nominal inertia and g_dob = 10: diverges"
    ),
    preset!(
        "fig6_diag_mn_sweep",
        "3R arm, noisy encoder, diagonal M_n, step under load; sweep mn_scale"
    ),
    preset!(
        "fig8_offdiag_mn",
        "3R arm, noisy encoder, diagonal-only M_n baseline; sweep mn_offdiag_scale"
    ),
    preset!(
        "fig9_bandwidth_x_inertia",
        "3R arm circle, filtered velocity, small diagonal M_n; sweep g_dob and mn_scale"
    ),
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}
