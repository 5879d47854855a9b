//! Named per-dataset hyper-parameter presets, embedded at build time.
//! Each entry is a partial config overlay in the same JSON schema as
//! `--config` files.

/// (name, raw JSON) pairs for every shipped preset.
pub const PRESETS: &[(&str, &str)] = &[
    ("usps-scgc", include_str!("../presets/usps-scgc.json")),
    (
        "usps-scgc-star",
        include_str!("../presets/usps-scgc-star.json"),
    ),
    ("hhar-scgc", include_str!("../presets/hhar-scgc.json")),
    (
        "hhar-scgc-star",
        include_str!("../presets/hhar-scgc-star.json"),
    ),
    ("reuters-scgc", include_str!("../presets/reuters-scgc.json")),
    (
        "reuters-scgc-star",
        include_str!("../presets/reuters-scgc-star.json"),
    ),
    ("acm-scgc", include_str!("../presets/acm-scgc.json")),
    (
        "acm-scgc-star",
        include_str!("../presets/acm-scgc-star.json"),
    ),
    (
        "citeseer-scgc",
        include_str!("../presets/citeseer-scgc.json"),
    ),
    (
        "citeseer-scgc-star",
        include_str!("../presets/citeseer-scgc-star.json"),
    ),
    ("dblp-scgc", include_str!("../presets/dblp-scgc.json")),
    (
        "dblp-scgc-star",
        include_str!("../presets/dblp-scgc-star.json"),
    ),
];

/// Raw JSON for a preset name, if it exists.
pub fn preset_json(name: &str) -> Option<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, json)| *json)
}

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::Variant;
    use crate::pipeline::TrainConfig;

    #[test]
    fn every_preset_parses_and_validates() {
        for (name, json) in PRESETS {
            let config =
                TrainConfig::from_json_str(json).unwrap_or_else(|e| panic!("preset {name}: {e}"));
            config
                .validate()
                .unwrap_or_else(|e| panic!("preset {name}: {e}"));
            let is_star = name.ends_with("-star");
            assert_eq!(config.variant == Variant::ScgcStar, is_star, "{name}");
        }
    }

    #[test]
    fn dblp_star_matches_reported_settings() {
        let config = TrainConfig::from_json_str(preset_json("dblp-scgc-star").unwrap()).unwrap();
        assert_eq!(config.alpha, 1.0);
        assert_eq!(config.hops, 1);
        assert_eq!(config.tau, 0.25);
        assert_eq!(config.beta, 0.1);
        assert_eq!(config.cluster_count, 4);
        assert_eq!(config.lr_train, 1e-3);
        assert_eq!(config.pretrain_epochs, 30);
        assert_eq!(config.train_epochs, 200);
        assert_eq!(config.batch_size, 256);
        assert_eq!(config.ae_dims, vec![500, 500, 2000, 10]);
    }

    #[test]
    fn hhar_uses_the_large_cluster_weight() {
        for name in ["hhar-scgc", "hhar-scgc-star"] {
            let config = TrainConfig::from_json_str(preset_json(name).unwrap()).unwrap();
            assert_eq!(config.beta, 10.0);
        }
    }

    #[test]
    fn unknown_preset_is_none() {
        assert!(preset_json("nope").is_none());
        assert_eq!(preset_names().len(), 12);
    }
}
