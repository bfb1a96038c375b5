//! Synthetic fractured-like permeability fields on the unit square.
//!
//! Coordinates are given on `[0, 1]^2`; use [`FieldSpec::scaled`] for other
//! domain extents. Contrast is `k_max / k_min` with a unit background.

use super::{Feature, FeatureKind, FieldSpec};

impl FieldSpec {
    /// Stretch feature coordinates from the unit square to `[0, lx] x [0, ly]`.
    pub fn scaled(mut self, lx: f64, ly: f64) -> Self {
        for f in &mut self.features {
            f.from = [f.from[0] * lx, f.from[1] * ly];
            f.to = [f.to[0] * lx, f.to[1] * ly];
        }
        self
    }
}

fn fractures_only(k_max: f64, features: Vec<Feature>) -> FieldSpec {
    FieldSpec {
        background: 1.0,
        k_max,
        k_min: 1.0,
        features,
    }
}

fn barriers_only(k_min: f64, features: Vec<Feature>) -> FieldSpec {
    FieldSpec {
        background: 1.0,
        k_max: 1.0,
        k_min,
        features,
    }
}

fn retag(features: Vec<Feature>, kind: FeatureKind) -> Vec<Feature> {
    features
        .into_iter()
        .map(|f| Feature { kind, ..f })
        .collect()
}

/// One full-height vertical fracture, three cells wide, left of the domain center.
pub fn vertical_fracture(k_max: f64) -> FieldSpec {
    fractures_only(
        k_max,
        vec![Feature::fracture([0.3, 0.0], [0.3, 1.0]).with_width(3.0)],
    )
}

/// Two full-height vertical fractures.
pub fn two_vertical_fractures(k_max: f64) -> FieldSpec {
    fractures_only(
        k_max,
        vec![
            Feature::fracture([0.3, 0.0], [0.3, 1.0]).with_width(3.0),
            Feature::fracture([0.7, 0.0], [0.7, 1.0]).with_width(3.0),
        ],
    )
}

/// One full-width horizontal barrier, three cells wide.
pub fn horizontal_barrier(k_min: f64) -> FieldSpec {
    barriers_only(
        k_min,
        vec![Feature::barrier([0.0, 0.3], [1.0, 0.3]).with_width(3.0)],
    )
}

/// Two full-width horizontal barriers.
pub fn two_horizontal_barriers(k_min: f64) -> FieldSpec {
    barriers_only(
        k_min,
        vec![
            Feature::barrier([0.0, 0.3], [1.0, 0.3]).with_width(3.0),
            Feature::barrier([0.0, 0.7], [1.0, 0.7]).with_width(3.0),
        ],
    )
}

fn network() -> Vec<Feature> {
    vec![
        Feature::fracture([0.05, 0.12], [0.62, 0.88]),
        Feature::fracture([0.30, 0.04], [0.95, 0.42]),
        Feature::fracture([0.72, 0.50], [0.72, 0.96]),
        Feature::fracture([0.08, 0.55], [0.45, 0.55]),
        Feature::fracture([0.15, 0.95], [0.40, 0.70]),
        Feature::fracture([0.52, 0.62], [0.93, 0.82]),
        Feature::fracture([0.10, 0.30], [0.26, 0.08]),
    ]
}

/// Network of straight fractures, three cells wide, with `k_max = contrast`.
pub fn fractures(contrast: f64) -> FieldSpec {
    let wide = network().into_iter().map(|f| f.with_width(3.0)).collect();
    fractures_only(contrast, wide)
}

/// The fracture network geometry turned into barriers with `k_min = 1 / contrast`.
pub fn barriers(contrast: f64) -> FieldSpec {
    barriers_only(1.0 / contrast, retag(network(), FeatureKind::Barrier))
}

/// Fractures and barriers together, `k_max = sqrt(contrast)`, `k_min = 1/sqrt(contrast)`.
/// Barriers are painted last and cut the fractures they cross.
pub fn combined(contrast: f64) -> FieldSpec {
    let root = contrast.sqrt();
    FieldSpec {
        background: 1.0,
        k_max: root,
        k_min: 1.0 / root,
        features: vec![
            Feature::fracture([0.04, 0.20], [0.58, 0.92]),
            Feature::fracture([0.35, 0.05], [0.96, 0.48]),
            Feature::fracture([0.70, 0.55], [0.78, 0.97]),
            Feature::fracture([0.06, 0.62], [0.40, 0.62]),
            Feature::barrier([0.10, 0.85], [0.45, 0.45]),
            Feature::barrier([0.53, 0.05], [0.53, 0.40]),
            Feature::barrier([0.60, 0.72], [0.95, 0.62]),
            Feature::barrier([0.15, 0.05], [0.30, 0.35]),
        ],
    }
}

fn channels_and_inclusions(kind: FeatureKind) -> Vec<Feature> {
    let strip = |from: [f64; 2], to: [f64; 2], width: f64| Feature {
        kind,
        from,
        to,
        width,
    };
    let mut features = vec![
        strip([0.05, 0.135], [0.55, 0.135], 2.0),
        strip([0.30, 0.345], [0.92, 0.345], 2.0),
        strip([0.08, 0.535], [0.46, 0.535], 2.0),
        strip([0.46, 0.535], [0.70, 0.655], 2.0),
        strip([0.70, 0.655], [0.95, 0.655], 2.0),
        strip([0.12, 0.865], [0.86, 0.865], 2.0),
    ];
    let inclusions = [
        (0.22, 0.27),
        (0.63, 0.21),
        (0.85, 0.13),
        (0.17, 0.43),
        (0.57, 0.46),
        (0.81, 0.51),
        (0.27, 0.71),
        (0.52, 0.77),
        (0.91, 0.77),
        (0.38, 0.95),
        (0.07, 0.95),
        (0.41, 0.21),
    ];
    features.extend(
        inclusions
            .iter()
            .map(|&(x, y)| strip([x - 0.01, y], [x + 0.01, y], 3.0)),
    );
    features
}

/// Long high-permeability channels plus small isolated inclusions,
/// `k_max = contrast`.
pub fn channelized(contrast: f64) -> FieldSpec {
    fractures_only(contrast, channels_and_inclusions(FeatureKind::Fracture))
}

/// The channelized geometry with low-permeability structures, `k_min = 1 / contrast`.
pub fn channelized_barriers(contrast: f64) -> FieldSpec {
    barriers_only(
        1.0 / contrast,
        channels_and_inclusions(FeatureKind::Barrier),
    )
}

/// Look up a preset by name.
pub fn by_name(name: &str, contrast: f64) -> Option<FieldSpec> {
    Some(match name {
        "homogeneous" => FieldSpec::homogeneous(1.0),
        "vertical-fracture" => vertical_fracture(contrast),
        "two-fractures" => two_vertical_fractures(contrast),
        "horizontal-barrier" => horizontal_barrier(1.0 / contrast),
        "two-barriers" => two_horizontal_barriers(1.0 / contrast),
        "fractures" => fractures(contrast),
        "barriers" => barriers(contrast),
        "combined" => combined(contrast),
        "channelized" => channelized(contrast),
        "channelized-barriers" => channelized_barriers(contrast),
        _ => return None,
    })
}

pub const NAMES: [&str; 10] = [
    "homogeneous",
    "vertical-fracture",
    "two-fractures",
    "horizontal-barrier",
    "two-barriers",
    "fractures",
    "barriers",
    "combined",
    "channelized",
    "channelized-barriers",
];
