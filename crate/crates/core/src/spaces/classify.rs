use crate::field::PermeabilityField;
use crate::grid::{FineGrid, Skeleton};

/// Cutoffs and Robin `α` values used to label interface edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierConfig {
    /// Fracture cutoff: an edge is a fracture edge if the larger adjacent permeability exceeds it.
    pub zeta_max: f64,
    /// Barrier cutoff: an edge is a barrier edge if the smaller adjacent permeability is below it.
    pub zeta_min: f64,
    pub alpha_small: f64,
    pub alpha_large: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            zeta_max: 1.0,
            zeta_min: 1.0,
            alpha_small: 1e-2,
            alpha_large: 1e2,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let ok = self.zeta_min > 0.0
            && self.zeta_max > 0.0
            && self.zeta_min <= self.zeta_max
            && self.alpha_small > 0.0
            && self.alpha_small < self.alpha_large
            && self.alpha_large.is_finite();
        if ok {
            Ok(())
        } else {
            Err(crate::Error::Config(format!(
                "invalid classifier settings {self:?}: need 0 < zeta_min <= zeta_max and 0 < alpha_small < alpha_large"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EdgeLabel {
    pub fracture: bool,
    pub barrier: bool,
}

impl EdgeLabel {
    pub fn is_background(&self) -> bool {
        !self.fracture && !self.barrier
    }
}

/// Half-open range of edge indices `[start, end)` along an interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Run {
    pub start: usize,
    pub end: usize,
}

impl Run {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Maximal runs of consecutive `true` flags, in order.
pub fn extract_runs(flags: impl IntoIterator<Item = bool>) -> Vec<Run> {
    let mut runs = Vec::new();
    let mut open: Option<usize> = None;
    let mut n = 0;
    for (l, flag) in flags.into_iter().enumerate() {
        match (flag, open) {
            (true, None) => open = Some(l),
            (false, Some(start)) => {
                runs.push(Run { start, end: l });
                open = None;
            }
            _ => {}
        }
        n = l + 1;
    }
    if let Some(start) = open {
        runs.push(Run { start, end: n });
    }
    runs
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceLabels {
    pub edges: Vec<EdgeLabel>,
    /// Robin `α` per edge from the adaptive rule.
    pub alpha: Vec<f64>,
    pub fracture_runs: Vec<Run>,
    pub barrier_runs: Vec<Run>,
}

impl InterfaceLabels {
    pub fn in_fracture_set(&self) -> bool {
        !self.fracture_runs.is_empty()
    }

    pub fn in_barrier_set(&self) -> bool {
        !self.barrier_runs.is_empty()
    }

    pub fn n_frac(&self) -> usize {
        self.fracture_runs.len()
    }

    pub fn n_barrier(&self) -> usize {
        self.barrier_runs.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceClassification {
    pub interfaces: Vec<InterfaceLabels>,
}

impl InterfaceClassification {
    pub fn fracture_interfaces(&self) -> impl Iterator<Item = usize> + '_ {
        self.interfaces
            .iter()
            .enumerate()
            .filter(|(_, f)| f.in_fracture_set())
            .map(|(k, _)| k)
    }

    pub fn barrier_interfaces(&self) -> impl Iterator<Item = usize> + '_ {
        self.interfaces
            .iter()
            .enumerate()
            .filter(|(_, f)| f.in_barrier_set())
            .map(|(k, _)| k)
    }
}

/// Label every skeleton edge from the permeabilities on both of its sides.
pub fn classify(
    grid: &FineGrid,
    field: &PermeabilityField,
    skeleton: &Skeleton,
    cfg: &ClassifierConfig,
) -> InterfaceClassification {
    let interfaces = skeleton
        .interfaces
        .iter()
        .map(|f| {
            let mut edges = Vec::with_capacity(f.len);
            let mut alpha = Vec::with_capacity(f.len);
            for l in 0..f.len {
                let (a, b) = f.edge_cells(grid, l);
                let (ka, kb) = (field.get(a), field.get(b));
                let fracture = ka.max(kb) > cfg.zeta_max;
                let barrier = ka.min(kb) < cfg.zeta_min;
                alpha.push(if fracture {
                    cfg.alpha_small
                } else {
                    cfg.alpha_large
                });
                edges.push(EdgeLabel { fracture, barrier });
            }
            let fracture_runs = extract_runs(edges.iter().map(|e| e.fracture));
            let barrier_runs = extract_runs(edges.iter().map(|e| e.barrier));
            InterfaceLabels {
                edges,
                alpha,
                fracture_runs,
                barrier_runs,
            }
        })
        .collect();
    InterfaceClassification { interfaces }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{generate_field, presets, Feature, FieldSpec};
    use crate::grid::build_decomposition;

    #[test]
    fn runs_are_maximal_and_sorted() {
        let flags = [false, true, true, false, true, false, false, true];
        assert_eq!(
            extract_runs(flags),
            vec![
                Run { start: 1, end: 3 },
                Run { start: 4, end: 5 },
                Run { start: 7, end: 8 }
            ]
        );
        assert!(extract_runs([false; 5]).is_empty());
        assert_eq!(extract_runs([true; 4]), vec![Run { start: 0, end: 4 }]);
    }

    #[test]
    fn homogeneous_field_is_all_background() {
        let g = FineGrid::unit_square(16).unwrap();
        let (_, s) = build_decomposition(&g, 4, 4).unwrap();
        let f = PermeabilityField::uniform(&g, 1.0).unwrap();
        let cfg = ClassifierConfig::default();
        let c = classify(&g, &f, &s, &cfg);
        for it in &c.interfaces {
            assert!(it.edges.iter().all(EdgeLabel::is_background));
            assert!(it.alpha.iter().all(|&a| a == cfg.alpha_large));
        }
        assert_eq!(c.fracture_interfaces().count(), 0);
        assert_eq!(c.barrier_interfaces().count(), 0);
    }

    #[test]
    fn vertical_fracture_crossing_horizontal_interface() {
        let g = FineGrid::unit_square(40).unwrap();
        let (_, s) = build_decomposition(&g, 2, 2).unwrap();
        let spec = FieldSpec {
            background: 1.0,
            k_max: 1e8,
            k_min: 1.0,
            features: vec![Feature::fracture([0.3, 0.0], [0.3, 1.0]).with_width(3.0)],
        };
        let f = generate_field(&spec, &g).unwrap();
        let cfg = ClassifierConfig::default();
        let c = classify(&g, &f, &s, &cfg);
        // Horizontal interface between subdomains 0 and 2 is id 2.
        let hz = &s.interfaces[2];
        assert_eq!((hz.lo, hz.hi), (0, 2));
        let labels = &c.interfaces[2];
        assert!(labels.in_fracture_set());
        assert_eq!(labels.fracture_runs.len(), 1);
        assert_eq!(labels.fracture_runs[0].len(), 3);
        for r in &labels.fracture_runs {
            for l in r.start..r.end {
                assert_eq!(labels.alpha[l], cfg.alpha_small);
            }
        }
        // The fracture never touches the vertical interfaces at x = 0.5.
        assert!(!c.interfaces[0].in_fracture_set());
        assert!(!c.interfaces[1].in_fracture_set());
    }

    #[test]
    fn labels_match_brute_force_scan() {
        let g = FineGrid::unit_square(160).unwrap();
        let (_, s) = build_decomposition(&g, 8, 8).unwrap();
        let f = generate_field(&presets::combined(1e8), &g).unwrap();
        let cfg = ClassifierConfig::default();
        let c = classify(&g, &f, &s, &cfg);
        let mut both = 0;
        for (it, labels) in s.interfaces.iter().zip(&c.interfaces) {
            let mut any_frac = false;
            let mut any_barrier = false;
            for l in 0..it.len {
                let (a, b) = it.edge_cells(&g, l);
                let fr = f.get(a) > 1.0 || f.get(b) > 1.0;
                let ba = f.get(a) < 1.0 || f.get(b) < 1.0;
                assert_eq!(labels.edges[l].fracture, fr);
                assert_eq!(labels.edges[l].barrier, ba);
                any_frac |= fr;
                any_barrier |= ba;
            }
            assert_eq!(labels.in_fracture_set(), any_frac);
            assert_eq!(labels.in_barrier_set(), any_barrier);
            if any_frac && any_barrier {
                both += 1;
            }
        }
        assert!(
            both > 0,
            "combined field should put both features on some interface"
        );
    }

    #[test]
    fn config_validation() {
        assert!(ClassifierConfig::default().validate().is_ok());
        let bad = ClassifierConfig {
            alpha_small: 10.0,
            alpha_large: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
