use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dimension::{functional_dimension, DimensionReport};
use crate::error::{Error, Result};
use crate::invariants::{
    block_matrix_constraint, deep_lin_comb_constraint, enumerate_layouts, lin_comb_constraint, m_shapes,
    search_sparse_lambdas, single_block_constraints, single_block_dimension, two_block_constraints, Cell,
    LinearRelation, RankConstraint, SkipReason, Symbol, TwoBlockStats,
};
use crate::linalg::{enumerate_minors, RationalMatrix};
use crate::model::{effective_widths, enumerate_active_paths, region_scan, width_rank, BlockPattern, Grid, RegionScan, Slice};
use crate::par::Execution;
use crate::poly::minor_polynomial;
use crate::report::config::{AnalysisConfig, Resolved, SliceKind, SCHEMA_VERSION};
use crate::transform::{dependency_rows, psi_inverse, BlockStatus, DatasetBlocks};
use crate::verify::{check_constraint, check_vanishing, sample_params, SampleSpec, VanishingItem, Verdict};

/// Which parts of the pipeline a subcommand runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Constraint inventory without verification.
    Invariants,
    /// Inventory plus verdicts.
    Verify,
    Dimension,
    /// Dataset-specific constraints and their verdicts.
    Transform,
    /// Everything.
    Report,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Invariants => "invariants",
            Stage::Verify => "verify",
            Stage::Dimension => "dimension",
            Stage::Transform => "transform",
            Stage::Report => "report",
        }
    }

    fn constraints(self) -> bool {
        !matches!(self, Stage::Dimension)
    }

    fn verifies(self) -> bool {
        matches!(self, Stage::Verify | Stage::Transform | Stage::Report)
    }

    fn dimension(self) -> bool {
        matches!(self, Stage::Dimension | Stage::Report)
    }

    fn transform(self) -> bool {
        matches!(self, Stage::Transform | Stage::Report)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub stage: Stage,
    /// Adds wall-clock timings to the report (which makes it nondeterministic).
    pub timing: bool,
    pub execution: Execution,
}

impl RunOptions {
    pub fn new(stage: Stage) -> Self {
        Self {
            stage,
            timing: false,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSummary {
    pub block: usize,
    pub pattern: String,
    pub active_paths: usize,
    pub effective_widths: Vec<usize>,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintEntry {
    pub id: String,
    pub blocks: Vec<usize>,
    pub expression: String,
    pub constraint: RankConstraint,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub polynomials: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedEntry {
    pub label: String,
    pub blocks: Vec<usize>,
    pub reason: String,
    /// Rank observations for a vacuous constraint, showing how far below
    /// its bound the matrix stays.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairEntry {
    pub blocks: [usize; 2],
    pub stats: TwoBlockStats,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationSet {
    pub id: String,
    pub block: usize,
    pub relations: Vec<LinearRelation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SingleBlockEntry {
    pub block: usize,
    pub points: usize,
    pub rank: usize,
    pub general_position: bool,
    pub independent_columns: Vec<usize>,
    pub expected_linear: usize,
    pub dimension: usize,
    pub minors: ConstraintEntry,
    pub linear: RelationSet,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformSection {
    pub status: Vec<BlockStatus>,
    pub constraints: Vec<ConstraintEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dependency_rows: Vec<RelationSet>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<SkippedEntry>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub constraints: usize,
    pub verified: usize,
    pub failed: usize,
    pub all_hold: bool,
}

/// Everything a run produced. Serialized with sorted keys; only `timing`
/// varies between identical runs, and it is absent unless requested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema_version: String,
    pub tool: ToolInfo,
    pub command: String,
    pub config: AnalysisConfig,
    pub blocks: Vec<BlockSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constraints: Vec<ConstraintEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<SkippedEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pairs: Vec<PairEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<Vec<i64>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub single_block: Vec<SingleBlockEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<DimensionReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<TransformSection>,
    pub summary: Summary,
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<BTreeMap<String, f64>>,
}

impl AnalysisReport {
    /// Pretty JSON with keys in sorted order.
    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("report serializes");
        let mut s = serde_json::to_string_pretty(&value).expect("value serializes");
        s.push('\n');
        s
    }

    /// Pattern constraints, the single-block minors, and transformed constraints.
    pub fn all_constraints(&self) -> impl Iterator<Item = &ConstraintEntry> {
        self.constraints
            .iter()
            .chain(self.single_block.iter().map(|s| &s.minors))
            .chain(self.transform.iter().flat_map(|t| t.constraints.iter()))
    }

    pub fn find(&self, label: &str) -> Option<&ConstraintEntry> {
        self.all_constraints().find(|c| c.constraint.label == label)
    }

    fn verdicts(&self) -> Vec<&Verdict> {
        self.all_constraints()
            .filter_map(|c| c.verdict.as_ref())
            .chain(self.single_block.iter().filter_map(|s| s.linear.verdict.as_ref()))
            .chain(
                self.transform
                    .iter()
                    .flat_map(|t| t.dependency_rows.iter().filter_map(|r| r.verdict.as_ref())),
            )
            .collect()
    }
}

fn remap(mut c: RankConstraint, map: &[usize]) -> RankConstraint {
    for cell in c.grid.iter_mut().flatten() {
        if let Cell::Sum(terms) = cell {
            for t in terms {
                t.block = map[t.block];
            }
        }
    }
    c
}

struct Builder<'a> {
    cfg: &'a AnalysisConfig,
    res: &'a Resolved,
    spec: SampleSpec,
    rank_spec: SampleSpec,
    verify: bool,
    next_id: usize,
    warnings: Vec<String>,
}

impl Builder<'_> {
    fn id(&mut self, prefix: &str) -> String {
        self.next_id += 1;
        format!("{prefix}{}", self.next_id)
    }

    fn entry(&mut self, c: RankConstraint) -> Result<ConstraintEntry> {
        let data = self.res.data.as_deref();
        let verdict = if self.verify {
            Some(check_constraint(&c, &self.res.arch, &self.res.patterns, data, &self.spec)?)
        } else {
            None
        };
        if c.counts.truncated {
            self.warnings.push(format!(
                "{}: {} of {} minors materialized",
                c.label, c.counts.materialized, c.counts.minors
            ));
        }
        let mut polynomials = Vec::new();
        let size = c.counts.minor_size;
        if size <= 3 && c.counts.minors <= self.cfg.limits.max_polynomials as u64 {
            for idx in enumerate_minors(c.rows(), c.cols(), size, None).indices {
                polynomials.push(minor_polynomial(&c, &idx)?.to_string());
            }
        }
        Ok(ConstraintEntry {
            id: self.id("C"),
            blocks: c.blocks(),
            expression: c.expression(),
            constraint: c,
            polynomials,
            verdict,
        })
    }

    fn relation_set(&mut self, block: usize, relations: Vec<LinearRelation>) -> Result<RelationSet> {
        let verdict = if self.verify && !relations.is_empty() {
            let items: Vec<VanishingItem> = relations.iter().cloned().map(VanishingItem::Linear).collect();
            Some(check_vanishing(
                &items,
                &self.res.arch,
                &self.res.patterns,
                self.res.data.as_deref(),
                &self.spec,
            )?)
        } else {
            None
        };
        Ok(RelationSet {
            id: self.id("R"),
            block,
            relations,
            verdict,
        })
    }
}

fn block_summaries(res: &Resolved) -> Result<Vec<BlockSummary>> {
    res.patterns
        .blocks
        .iter()
        .enumerate()
        .map(|(i, a)| {
            Ok(BlockSummary {
                block: i,
                pattern: a.bit_string(),
                active_paths: enumerate_active_paths(&res.arch, a)?.len(),
                effective_widths: effective_widths(&res.arch, a)?,
                rank: width_rank(&res.arch, a)?,
            })
        })
        .collect()
}

fn pattern_constraints(
    b: &mut Builder,
    constraints: &mut Vec<ConstraintEntry>,
    skipped: &mut Vec<SkippedEntry>,
    pairs: &mut Vec<PairEntry>,
) -> Result<Option<Vec<Vec<i64>>>> {
    let (arch, patterns): (_, &BlockPattern) = (&b.res.arch, &b.res.patterns);
    let k = patterns.len();
    let cap = b.cfg.limits.max_minors;
    let shapes = m_shapes(k, arch.output_dim(), arch.input_dim());
    if k != 2 {
        for (i, a) in patterns.blocks.iter().enumerate() {
            let c = RankConstraint::single("block-rank", Symbol::M, Cell::block(i), &shapes, width_rank(arch, a)?, cap)?;
            if c.is_vacuous() {
                skipped.push(SkippedEntry {
                    label: c.label,
                    blocks: vec![i],
                    reason: "vacuous".into(),
                    verdict: None,
                });
            } else {
                let e = b.entry(c)?;
                constraints.push(e);
            }
        }
    }
    for i in 0..k {
        for j in i + 1..k {
            let pair = BlockPattern::new(vec![patterns.blocks[i].clone(), patterns.blocks[j].clone()])?;
            let analysis = two_block_constraints(arch, &pair, &b.rank_spec, cap)?;
            pairs.push(PairEntry {
                blocks: [i, j],
                stats: analysis.stats,
            });
            for c in analysis.constraints {
                if k > 2 && (c.label.starts_with("type1") || c.label.starts_with("type2")) {
                    continue;
                }
                let e = b.entry(remap(c, &[i, j]))?;
                constraints.push(e);
            }
            for s in analysis.skipped {
                let verdict = match (&s.constraint, b.verify) {
                    (Some(c), true) => {
                        let c = remap(c.clone(), &[i, j]);
                        Some(check_constraint(&c, arch, patterns, None, &b.spec)?)
                    }
                    _ => None,
                };
                skipped.push(SkippedEntry {
                    verdict,
                    label: s.label,
                    blocks: vec![i, j],
                    reason: match s.reason {
                        SkipReason::Vacuous => "vacuous",
                        SkipReason::Redundant => "redundant",
                        SkipReason::Gated => "gated",
                    }
                    .into(),
                });
            }
        }
    }

    let search = &b.cfg.search;
    let mut lambdas = None;
    if k >= 2 && search.enabled.unwrap_or(k >= 3) {
        let max_support = search.max_support.unwrap_or(arch.widths()[1]);
        let found = search_sparse_lambdas(arch, patterns, search.coeff_bound, max_support)?;
        for l in found.iter().filter(|l| l.iter().filter(|&&x| x != 0).count() >= 2) {
            let c = if arch.depth() == 2 {
                lin_comb_constraint(arch, patterns, l, cap)?
            } else {
                deep_lin_comb_constraint(arch, patterns, l, cap)?
            };
            if c.is_vacuous() {
                skipped.push(SkippedEntry {
                    blocks: c.blocks(),
                    label: c.label,
                    reason: "vacuous".into(),
                    verdict: None,
                });
            } else {
                let e = b.entry(c)?;
                constraints.push(e);
            }
        }
        if search.max_layouts > 0 && !found.is_empty() {
            let mut kept = 0;
            for layout in enumerate_layouts(found.len(), search.max_rows, search.max_cols) {
                if kept == search.max_layouts {
                    break;
                }
                let c = block_matrix_constraint(arch, patterns, &found, &layout, cap)?;
                if !c.is_vacuous() {
                    kept += 1;
                    let e = b.entry(c)?;
                    constraints.push(e);
                }
            }
        }
        lambdas = Some(found);
    }
    for bm in &search.block_matrices {
        let c = block_matrix_constraint(arch, patterns, &bm.lambdas, &bm.layout, cap)?;
        let e = b.entry(c)?;
        constraints.push(e);
    }
    Ok(lambdas)
}

fn single_block_entries(b: &mut Builder, data: &[RationalMatrix]) -> Result<Vec<SingleBlockEntry>> {
    let (arch, patterns) = (&b.res.arch, &b.res.patterns);
    let mut out = Vec::new();
    for (i, (a, x)) in patterns.blocks.iter().zip(data).enumerate() {
        let analysis = single_block_constraints(arch, a, x, arch.has_bias(), b.cfg.limits.max_minors)?;
        for w in &analysis.warnings {
            b.warnings.push(format!("block {i}: {w}"));
        }
        let relations = analysis
            .linear
            .into_iter()
            .map(|mut r| {
                r.block = i;
                r
            })
            .collect();
        let minors = b.entry(remap(analysis.minors, &[i]))?;
        let linear = b.relation_set(i, relations)?;
        out.push(SingleBlockEntry {
            block: i,
            points: x.cols(),
            rank: analysis.rank,
            general_position: analysis.general_position,
            independent_columns: analysis.independent_columns,
            expected_linear: analysis.expected_linear,
            dimension: single_block_dimension(arch, a, x.cols(), arch.has_bias())?,
            minors,
            linear,
        });
    }
    Ok(out)
}

fn transform_section(b: &mut Builder, pattern: &[ConstraintEntry], data: &[RationalMatrix]) -> Result<TransformSection> {
    let x = DatasetBlocks::new(data.to_vec())?;
    let arch = &b.res.arch;
    let mut section = TransformSection {
        status: x.status.clone(),
        constraints: Vec::new(),
        dependency_rows: Vec::new(),
        skipped: Vec::new(),
    };
    if arch.has_bias() {
        b.warnings
            .push("pattern constraints are not carried to outputs for networks with biases".to_string());
    } else {
        for e in pattern.iter().filter(|e| !e.constraint.redundant) {
            match psi_inverse(&e.constraint, &x) {
                Ok(c) => {
                    let entry = b.entry(c)?;
                    section.constraints.push(entry);
                }
                Err(Error::DeficientBlock { block, reason }) => section.skipped.push(SkippedEntry {
                    label: e.constraint.label.clone(),
                    blocks: e.blocks.clone(),
                    reason: format!("block {block}: {reason}"),
                    verdict: None,
                }),
                Err(err) => return Err(err),
            }
        }
    }
    for (i, (xi, st)) in x.blocks.iter().zip(&x.status).enumerate() {
        if matches!(st, BlockStatus::Invertible) {
            continue;
        }
        if let BlockStatus::Oversized { core } = st {
            b.warnings.push(format!("block {i}: transformed through data columns {core:?}"));
        }
        let rels = dependency_rows(i, xi, arch.has_bias(), arch.output_dim());
        if !rels.is_empty() {
            let set = b.relation_set(i, rels)?;
            section.dependency_rows.push(set);
        }
    }
    Ok(section)
}

/// Runs the stages selected by `opts.stage` on a validated config.
pub fn run_pipeline(cfg: &AnalysisConfig, opts: &RunOptions) -> Result<AnalysisReport> {
    let res = cfg.resolve()?;
    let stage = opts.stage;
    if stage == Stage::Transform && res.data.is_none() {
        return Err(Error::Config {
            path: "dataset".into(),
            message: "the transform stage needs a dataset".into(),
        });
    }
    let mut timing = BTreeMap::new();
    let mut clock = Instant::now();
    let mut lap = |name: &str, timing: &mut BTreeMap<String, f64>| {
        timing.insert(name.to_string(), clock.elapsed().as_secs_f64() * 1e3);
        clock = Instant::now();
    };

    let mut b = Builder {
        cfg,
        res: &res,
        spec: cfg.sample_spec().with_execution(opts.execution),
        rank_spec: cfg.rank_spec().with_execution(opts.execution),
        verify: stage.verifies(),
        next_id: 0,
        warnings: Vec::new(),
    };
    let blocks = block_summaries(&res)?;
    lap("paths_ms", &mut timing);

    let (mut constraints, mut skipped, mut pairs) = (Vec::new(), Vec::new(), Vec::new());
    let mut lambdas = None;
    if stage.constraints() {
        lambdas = pattern_constraints(&mut b, &mut constraints, &mut skipped, &mut pairs)?;
        lap("invariants_ms", &mut timing);
    }

    let mut single_block = Vec::new();
    let mut transform = None;
    if let Some(data) = &res.data {
        if stage.constraints() {
            single_block = single_block_entries(&mut b, data)?;
        }
        if stage.transform() {
            transform = Some(transform_section(&mut b, &constraints, data)?);
        }
        lap("transform_ms", &mut timing);
    }
    if stage == Stage::Transform {
        constraints.clear();
        skipped.clear();
    }

    let mut dimension = None;
    if stage.dimension() {
        if res.arch.has_bias() {
            b.warnings.push("functional dimension is computed for networks without biases only".into());
        } else {
            let d = functional_dimension(&res.arch, &res.patterns, &b.rank_spec)?;
            b.warnings.extend(d.warnings.iter().cloned());
            dimension = Some(d);
        }
        lap("dimension_ms", &mut timing);
    }

    let mut report = AnalysisReport {
        schema_version: SCHEMA_VERSION.to_string(),
        tool: ToolInfo {
            name: "reluvar".into(),
            version: env!("CARGO_PKG_VERSION").into(),
        },
        command: stage.name().into(),
        config: cfg.clone(),
        blocks,
        constraints,
        skipped,
        pairs,
        lambdas,
        single_block,
        dimension,
        transform,
        summary: Summary::default(),
        warnings: b.warnings,
        timing: opts.timing.then_some(timing),
    };
    let verdicts = report.verdicts();
    let failed = verdicts.iter().filter(|v| !v.holds).count();
    report.summary = Summary {
        constraints: report.all_constraints().count(),
        verified: verdicts.len(),
        failed,
        all_hold: failed == 0,
    };
    Ok(report)
}

/// Scans the slice described by `cfg.regions` (or the default input slice).
pub fn run_regions(cfg: &AnalysisConfig, grid: Option<(usize, usize)>, exec: Execution) -> Result<RegionScan> {
    let res = cfg.resolve()?;
    let rc = cfg.regions.clone().unwrap_or_default();
    let (width, height) = grid.unwrap_or((rc.width, rc.height));
    let r = rc.radius.clone();
    let grid = Grid {
        width,
        height,
        u_range: (-r.clone(), r.clone()),
        v_range: (-r.clone(), r),
    };
    let spec = cfg.sample_spec();
    let arch = &res.arch;
    let sampled = |i: usize| sample_params(arch, &spec, i).to_flat();
    let axis = |n: usize, i: usize| -> Vec<crate::rational::Q> {
        (0..n)
            .map(|j| crate::rational::q(i64::from(j == i)))
            .collect()
    };
    let slice = match rc.kind {
        SliceKind::Input => {
            let n0 = arch.input_dim();
            let flat = rc.theta.map_or_else(|| sampled(0), |t| t.0);
            Slice::Input {
                theta: crate::model::ParamAssignment::from_flat(arch, &flat)?,
                origin: rc.origin.map_or_else(|| vec![crate::rational::q(0); n0], |p| p.0),
                dir_u: rc.dir_u.map_or_else(|| axis(n0, 0), |p| p.0),
                dir_v: rc.dir_v.map_or_else(|| axis(n0, 1), |p| p.0),
            }
        }
        SliceKind::Parameter => {
            let data = res.data.as_ref().and_then(|d| d.get(rc.block)).ok_or_else(|| Error::Config {
                path: "regions.block".into(),
                message: "parameter slices need the dataset block they evaluate".into(),
            })?;
            Slice::Parameter {
                theta0: rc.theta.map_or_else(|| sampled(0), |t| t.0),
                dir_u: rc.dir_u.map_or_else(|| sampled(1), |p| p.0),
                dir_v: rc.dir_v.map_or_else(|| sampled(2), |p| p.0),
                data: data.clone(),
            }
        }
    };
    region_scan(arch, &slice, &grid, exec)
}
