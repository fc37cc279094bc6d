use crate::error::{Error, Result};
use crate::report::config::{AnalysisConfig, BlockMatrixConfig, DataPoint, RegionsConfig, SliceKind};
use crate::rational::q;

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    build: fn() -> AnalysisConfig,
}

impl Preset {
    pub fn config(&self) -> AnalysisConfig {
        let mut cfg = (self.build)();
        cfg.name = Some(self.name.to_string());
        cfg
    }
}

fn points(cols: &[&[i64]]) -> Vec<DataPoint> {
    cols.iter().map(|c| DataPoint(c.iter().map(|&x| q(x)).collect())).collect()
}

fn single_block_322() -> AnalysisConfig {
    let mut c = AnalysisConfig::new(&[3, 2, 2], &[&[&[1, 0]]]);
    c.dataset = Some(vec![points(&[&[3, 0, -1], &[1, 1, -1], &[3, 5, 5], &[0, 4, 0]])]);
    c
}

fn shallow_4x4() -> AnalysisConfig {
    AnalysisConfig::new(&[4, 4, 4], &[&[&[1, 1, 1, 0]], &[&[0, 1, 1, 1]]])
}

fn shallow_434_narrow() -> AnalysisConfig {
    AnalysisConfig::new(&[4, 3, 4], &[&[&[1, 1, 0]], &[&[0, 1, 1]]])
}

fn shallow_434_dimdrop() -> AnalysisConfig {
    AnalysisConfig::new(&[3, 4, 3], &[&[&[1, 1, 1, 0]], &[&[0, 1, 1, 1]]])
}

fn shallow_434_three_block() -> AnalysisConfig {
    let mut c = AnalysisConfig::new(&[3, 4, 3], &[&[&[1, 1, 0, 0]], &[&[1, 0, 1, 0]], &[&[1, 0, 0, 1]]]);
    c.search.coeff_bound = 1;
    c.search.block_matrices = vec![BlockMatrixConfig {
        lambdas: vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]],
        layout: vec![vec![0, 1], vec![2, 1]],
    }];
    c
}

fn deep_2222() -> AnalysisConfig {
    AnalysisConfig::new(&[2, 2, 2, 2, 2], &[&[&[1, 1], &[0, 1], &[1, 1]], &[&[0, 1], &[1, 1], &[0, 1]]])
}

fn deep_33233() -> AnalysisConfig {
    AnalysisConfig::new(
        &[3, 3, 2, 3, 3],
        &[&[&[1, 1, 1], &[1, 1], &[1, 1, 1]], &[&[0, 1, 1], &[1, 1], &[1, 1, 1]]],
    )
}

fn deep_tightness() -> AnalysisConfig {
    AnalysisConfig::new(
        &[4, 3, 3, 3, 4],
        &[&[&[1, 1, 0], &[0, 1, 1], &[1, 1, 0]], &[&[0, 1, 1], &[1, 1, 0], &[0, 1, 1]]],
    )
}

fn multiblock_455() -> AnalysisConfig {
    AnalysisConfig::new(
        &[4, 5, 5],
        &[&[&[1, 0, 0, 1, 1]], &[&[0, 1, 0, 1, 1]], &[&[0, 0, 1, 0, 1]]],
    )
}

fn psi_invertible_blocks() -> AnalysisConfig {
    let mut c = AnalysisConfig::new(&[2, 1, 2, 2], &[&[&[1], &[1, 0]], &[&[1], &[0, 1]]]);
    c.dataset = Some(vec![points(&[&[1, 1], &[2, 3]]), points(&[&[1, 2], &[3, 1]])]);
    c
}

fn psi_oversized() -> AnalysisConfig {
    let mut c = psi_invertible_blocks();
    c.dataset = Some(vec![points(&[&[3, 1], &[1, 1], &[1, 3]]), points(&[&[1, 0], &[2, 1]])]);
    c
}

fn regions_222() -> AnalysisConfig {
    let mut c = AnalysisConfig::new(&[2, 2, 2], &[&[&[1, 1]]]);
    c.regions = Some(RegionsConfig {
        kind: SliceKind::Input,
        width: 41,
        height: 41,
        ..RegionsConfig::default()
    });
    c
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "single-block-322",
        description: "one block of four points in R^3 through a (3,2,2) network: 2 linear relations, 3 quadrics",
        build: single_block_322,
    },
    Preset {
        name: "shallow-4x4-two-block",
        description: "(4,4,4) with overlapping hidden supports: two determinants, 16 cubics, dimension 26",
        build: shallow_4x4,
    },
    Preset {
        name: "shallow-434-narrow",
        description: "(4,3,4) with two blocks sharing one neuron: 48 cubics, dimension 21",
        build: shallow_434_narrow,
    },
    Preset {
        name: "shallow-434-dimdrop",
        description: "(3,4,3) two blocks whose Jacobian rank falls one below the expected dimension",
        build: shallow_434_dimdrop,
    },
    Preset {
        name: "shallow-434-three-block",
        description: "(3,4,3) three blocks sharing one neuron: sparse combinations and a 2x2 block matrix",
        build: shallow_434_three_block,
    },
    Preset {
        name: "deep-2222-fig3",
        description: "depth-4 width-2 network where only the single-block determinants survive: dimension 6 of 8",
        build: deep_2222,
    },
    Preset {
        name: "deep-33233-ex68",
        description: "(3,3,2,3,3) pair differing in one first-layer neuron: rank-1 difference, dimension 12 of 18",
        build: deep_33233,
    },
    Preset {
        name: "deep-tightness-remark",
        description: "(4,3,3,3,4) pair whose difference has generic rank 3 below the path bound 4",
        build: deep_tightness,
    },
    Preset {
        name: "multiblock-455-dim40",
        description: "(4,5,5) three blocks with five neuron classes: dimension 40 of 60",
        build: multiblock_455,
    },
    Preset {
        name: "psi-example-51",
        description: "(2,1,2,2) pattern constraints carried to the outputs of two invertible data blocks",
        build: psi_invertible_blocks,
    },
    Preset {
        name: "psi-oversized-block",
        description: "three points in R^2 in one block: core columns plus the relation (1,-4,1)",
        build: psi_oversized,
    },
    Preset {
        name: "regions-222",
        description: "activation regions of a (2,2,2) network on a 41x41 input grid",
        build: regions_222,
    },
];

/// Alternative names accepted by [`find_preset`].
pub const ALIASES: &[(&str, &str)] = &[("deep-6-8", "deep-2222-fig3")];

pub fn find_preset(name: &str) -> Result<&'static Preset> {
    let name = ALIASES.iter().find(|(a, _)| *a == name).map_or(name, |(_, n)| n);
    PRESETS
        .iter()
        .find(|p| p.name == name)
        .ok_or_else(|| Error::UnknownPreset(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn names_are_unique_and_valid() {
        let names: BTreeSet<&str> = PRESETS.iter().map(|p| p.name).collect();
        assert_eq!(names.len(), PRESETS.len());
        for p in PRESETS {
            p.config().validate().unwrap_or_else(|e| panic!("{}: {e}", p.name));
        }
        assert_eq!(find_preset("deep-6-8").unwrap().name, "deep-2222-fig3");
        assert!(find_preset("nope").is_err());
    }
}
