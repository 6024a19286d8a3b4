//! Bundled example programs.

pub const PROGRAMS: &[(&str, &str)] = &[
    ("ambiguous", include_str!("../programs/ambiguous.lv")),
    ("evens", include_str!("../programs/evens.lv")),
    ("from_n", include_str!("../programs/from_n.lv")),
    ("head", include_str!("../programs/head.lv")),
    ("membership", include_str!("../programs/membership.lv")),
    ("por_false", include_str!("../programs/por_false.lv")),
    ("por_true", include_str!("../programs/por_true.lv")),
    ("reaches", include_str!("../programs/reaches.lv")),
    ("relation", include_str!("../programs/relation.lv")),
    ("twophase", include_str!("../programs/twophase.lv")),
];

pub fn source(name: &str) -> Option<&'static str> {
    PROGRAMS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}
