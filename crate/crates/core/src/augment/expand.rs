use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imaging::Raster;
use crate::rng::Rng;

use super::manifest::{resolve, DatasetManifest};
use super::plan::AugmentPlan;
use super::registry::{Augmentation, AugmentationRegistry};

/// Desired per-class totals after expansion (originals included).
pub type ExpansionTargets = BTreeMap<String, usize>;

/// One generated sample: a source index and the operator chain applied to it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ExpansionItem {
    pub source: usize,
    /// Index into [`variant_chains`].
    pub variant: usize,
}

/// Operator chains (indices into `names`) available for expansion.
///
/// Single operators come first. When a target needs more samples than they
/// provide, two-operator chains follow: a geometric operator followed by a
/// later one, excluding rotation-on-rotation (that is just another rotation).
/// Returns the chains and how many of them are single operators.
pub fn variant_chains(names: &[&str], geometric: &[bool]) -> (Vec<Vec<usize>>, usize) {
    let mut chains: Vec<Vec<usize>> = (0..names.len()).map(|i| vec![i]).collect();
    let singles = chains.len();
    let is_rot = |i: usize| names[i].starts_with("rot");
    for i in 0..names.len() {
        if !geometric[i] {
            continue;
        }
        for j in i + 1..names.len() {
            if is_rot(i) && is_rot(j) {
                continue;
            }
            chains.push(vec![i, j]);
        }
    }
    (chains, singles)
}

/// Choose which `(source, chain)` pairs to generate for one class.
///
/// Without a target every single operator runs on every source. With a
/// target, singles are used first (a seeded subsample if there are more than
/// needed), then two-operator chains.
pub fn plan_class_expansion(
    class: &str,
    sources: usize,
    chains: usize,
    singles: usize,
    target: Option<usize>,
    rng: &mut Rng,
) -> Result<Vec<ExpansionItem>> {
    let pool = |range: std::ops::Range<usize>| -> Vec<ExpansionItem> {
        (0..sources).flat_map(|source| range.clone().map(move |variant| ExpansionItem { source, variant })).collect()
    };
    let Some(target) = target else {
        return Ok(pool(0..singles));
    };
    if target < sources {
        return Err(Error::param(format!("class `{class}`: target {target} is below the {sources} source images")));
    }
    let capacity = sources * (1 + chains);
    if target > capacity {
        return Err(Error::param(format!(
            "class `{class}`: target {target} exceeds the {capacity} images the plan can produce"
        )));
    }
    let mut need = target - sources;
    let mut picked = Vec::with_capacity(need);
    for range in [0..singles, singles..chains] {
        let mut candidates = pool(range);
        if need >= candidates.len() {
            need -= candidates.len();
            picked.extend(candidates);
        } else {
            rng.shuffle(&mut candidates);
            candidates.truncate(need);
            candidates.sort();
            picked.extend(candidates);
            need = 0;
        }
        if need == 0 {
            break;
        }
    }
    Ok(picked)
}

fn plan_all(
    manifest: &DatasetManifest,
    plan: &AugmentPlan,
    ops: &[Box<dyn Augmentation>],
    targets: Option<&ExpansionTargets>,
    rng: &Rng,
) -> Result<(Vec<Vec<usize>>, Vec<Vec<ExpansionItem>>)> {
    let names = plan.operator_names();
    let geometric: Vec<bool> = ops.iter().map(|o| o.is_geometric()).collect();
    let (chains, singles) = variant_chains(&names, &geometric);
    if let Some(t) = targets {
        if let Some(unknown) = t.keys().find(|k| manifest.class_index(k).is_none()) {
            return Err(Error::param(format!("target for unknown class `{unknown}`")));
        }
    }
    let items = manifest
        .entries
        .iter()
        .enumerate()
        .map(|(ci, e)| {
            let target = targets.and_then(|t| t.get(&e.class).copied());
            let mut pick_rng = rng.child(0).child(ci as u64);
            plan_class_expansion(&e.class, e.count, chains.len(), singles, target, &mut pick_rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((chains, items))
}

/// Counts after expansion, without touching any files.
pub fn expansion_counts(
    manifest: &DatasetManifest,
    plan: &AugmentPlan,
    targets: Option<&ExpansionTargets>,
    rng: &Rng,
) -> Result<DatasetManifest> {
    let ops = plan.build_operators(&AugmentationRegistry::default())?;
    let (_, items) = plan_all(manifest, plan, &ops, targets, rng)?;
    let counts: Vec<(String, usize)> =
        manifest.entries.iter().zip(&items).map(|(e, it)| (e.class.clone(), e.count + it.len())).collect();
    Ok(DatasetManifest::from_counts(&counts))
}

/// Expand every class of `manifest` (files resolved against `source_root`)
/// into `out_dir/<class>/`.
///
/// Source images are copied unchanged; each generated image is written as
/// `<stem>__<op>[__<op>].png`, with the noise operator spelled
/// `noise<seed>`. Every generated image draws from its own child generator,
/// so output does not depend on processing order.
pub fn expand_dataset(
    manifest: &DatasetManifest,
    plan: &AugmentPlan,
    rng: &Rng,
    targets: Option<&ExpansionTargets>,
    source_root: &Path,
    out_dir: &Path,
) -> Result<DatasetManifest> {
    let registry = AugmentationRegistry::default();
    let ops = plan.build_operators(&registry)?;
    for e in &manifest.entries {
        if e.files.len() != e.count {
            return Err(Error::contract(format!(
                "class `{}` lists {} files for count {}",
                e.class,
                e.files.len(),
                e.count
            )));
        }
        for f in &e.files {
            let p = resolve(source_root, f);
            if !p.is_file() {
                return Err(Error::Ingestion { path: p, reason: "file not found".into() });
            }
        }
    }
    let (chains, items) = plan_all(manifest, plan, &ops, targets, rng)?;

    let mut out_classes = Vec::with_capacity(manifest.entries.len());
    for (ci, (entry, class_items)) in manifest.entries.iter().zip(&items).enumerate() {
        let class_dir = out_dir.join(&entry.class);
        std::fs::create_dir_all(&class_dir)?;
        let mut files = Vec::with_capacity(entry.count + class_items.len());
        let mut seen = HashSet::new();
        let mut stems = Vec::with_capacity(entry.count);
        for f in &entry.files {
            let src = resolve(source_root, f);
            let name = src
                .file_name()
                .and_then(|n| n.to_str())
                .ok_or_else(|| Error::Ingestion { path: src.clone(), reason: "bad file name".into() })?
                .to_string();
            if !seen.insert(name.clone()) {
                return Err(Error::contract(format!("duplicate file name `{name}` in class `{}`", entry.class)));
            }
            std::fs::copy(&src, class_dir.join(&name))?;
            stems.push(Path::new(&name).file_stem().and_then(|s| s.to_str()).unwrap_or(&name).to_string());
            files.push(format!("{}/{name}", entry.class));
        }

        let sources: Vec<Raster> =
            entry.files.par_iter().map(|f| Raster::load(&resolve(source_root, f))).collect::<Result<_>>()?;

        let generated: Vec<String> = class_items
            .par_iter()
            .map(|item| {
                let mut op_rng = rng.child(1).child(ci as u64).child(item.source as u64).child(item.variant as u64);
                let mut img = sources[item.source].clone();
                let mut name = stems[item.source].clone();
                for &op in &chains[item.variant] {
                    let seed = op_rng.seed();
                    img = ops[op].apply(&img, &mut op_rng)?;
                    name.push_str("__");
                    name.push_str(ops[op].name());
                    if !ops[op].is_geometric() {
                        name.push_str(&seed.to_string());
                    }
                }
                name.push_str(".png");
                img.save_png(&class_dir.join(&name))?;
                Ok(format!("{}/{name}", entry.class))
            })
            .collect::<Result<_>>()?;
        for g in &generated {
            if !seen.insert(g.clone()) {
                return Err(Error::contract(format!("generated name collision `{g}`")));
            }
        }
        files.extend(generated);
        out_classes.push((entry.class.clone(), files));
    }
    Ok(DatasetManifest::from_files(out_classes))
}
