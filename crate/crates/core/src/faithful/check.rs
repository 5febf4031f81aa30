use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use super::amap::AbstractionMap;
use super::image::bundle_images;
use super::separate::{component_bundle, fingerprints, separate};
use super::subbundle::initial_embedding;
use crate::abs::{abs, strip_markers, AbsError, AbsEvent};
use crate::chor::Choreography;
use crate::crypto::{enumerate_bundles, Bounds, EnumerationStats, Execution, Protocol, Term};
use crate::strand::{
    bundle_to_json, isomorphic, isomorphic_by, validate_bundle, Bundle, MatchModulo,
};

/// Edge assignments tried per concrete bundle when forming images.
pub const IMAGE_CAP: usize = 256;

/// Ordered so that `max` picks the overriding verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Inconclusive,
    Fail,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Inconclusive => "INCONCLUSIVE",
            Verdict::Fail => "FAIL",
        })
    }
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail => 1,
            Verdict::Inconclusive => 2,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Witness {
    pub env: usize,
    pub execution: usize,
    /// Set when the witness is one separated session of the execution.
    pub component: Option<usize>,
    /// Image recomputed from the stored bundle and compared again.
    pub revalidated: bool,
    pub strand_map: BTreeMap<String, String>,
    pub bundle: Value,
}

#[derive(Clone, Debug, Serialize)]
pub struct Clause1 {
    pub verdict: Verdict,
    pub witnesses: Vec<Witness>,
    pub uncovered_envs: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Finding {
    pub execution: usize,
    pub verdict: Verdict,
    pub reason: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Clause2 {
    pub verdict: Verdict,
    pub executions_checked: usize,
    pub components_checked: usize,
    pub findings: Vec<Finding>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FaithfulnessReport {
    pub schema: u32,
    pub bounds: Bounds,
    pub enumeration: EnumerationStats,
    pub abstract_bundles: usize,
    pub concrete_bundles: usize,
    pub clause1: Clause1,
    pub clause2: Clause2,
    pub verdict: Verdict,
    pub note: &'static str,
}

#[derive(Debug, Error)]
pub enum FaithfulError {
    #[error(transparent)]
    Abs(#[from] AbsError),
    #[error("thread pool: {0}")]
    Pool(String),
}

fn find_image(
    a: &AbstractionMap,
    b: &Bundle<Term>,
    target: &Bundle<AbsEvent>,
) -> Option<BTreeMap<String, String>> {
    bundle_images(a, b, IMAGE_CAP).iter().find_map(|img| {
        isomorphic_by(img, target, |x, y, r| x.match_modulo(y, r))
            .map(|m| m.into_iter().map(|(k, v)| (k.0, v.0)).collect())
    })
}

/// A candidate index and the strand renaming onto the environment.
type Match = (usize, BTreeMap<String, String>);

/// The bundles that may witness clause 1: each execution and, when it runs
/// several sessions, each separated session on its own.
fn candidates(runs: &[Execution]) -> Vec<(usize, Option<usize>, Bundle<Term>)> {
    let mut out = Vec::new();
    for (j, r) in runs.iter().enumerate() {
        out.push((j, None, r.bundle.clone()));
        if let Some(fam) = separate(&r.bundle, &fingerprints(&r.bundle)) {
            if fam.components.len() > 1 {
                for (k, comp) in fam.components.iter().enumerate() {
                    out.push((j, Some(k), component_bundle(&r.bundle, comp)));
                }
            }
        }
    }
    out
}

fn clause1(
    a: &AbstractionMap,
    envs: &[Bundle<AbsEvent>],
    runs: &[Execution],
    truncated: bool,
) -> Clause1 {
    let cands = candidates(runs);
    let found: Vec<(usize, Option<Match>)> = envs
        .par_iter()
        .enumerate()
        .map(|(i, env)| {
            (
                i,
                cands
                    .iter()
                    .enumerate()
                    .find_map(|(j, c)| find_image(a, &c.2, env).map(|m| (j, m))),
            )
        })
        .collect();
    let mut witnesses = Vec::new();
    let mut uncovered = Vec::new();
    for (i, hit) in found {
        match hit {
            Some((j, strand_map)) => {
                let (execution, component, b) = &cands[j];
                let revalidated = validate_bundle(b).is_empty()
                    && bundle_images(a, b, IMAGE_CAP)
                        .iter()
                        .any(|img| isomorphic(img, &envs[i]));
                witnesses.push(Witness {
                    env: i,
                    execution: *execution,
                    component: *component,
                    revalidated,
                    strand_map,
                    bundle: bundle_to_json(b),
                });
            }
            None => uncovered.push(i),
        }
    }
    let verdict = if witnesses.iter().any(|w| !w.revalidated) {
        Verdict::Fail
    } else if uncovered.is_empty() {
        Verdict::Pass
    } else if truncated {
        Verdict::Inconclusive
    } else {
        Verdict::Fail
    };
    Clause1 {
        verdict,
        witnesses,
        uncovered_envs: uncovered,
    }
}

/// Checks one concrete bundle; returns the number of components checked
/// and any problem found.
fn clause2_one(
    a: &AbstractionMap,
    envs: &[Bundle<AbsEvent>],
    j: usize,
    run: &Execution,
) -> (usize, Option<Finding>) {
    let finding = |verdict, reason: String| {
        Some(Finding {
            execution: j,
            verdict,
            reason,
        })
    };
    let Some(fam) = separate(&run.bundle, &fingerprints(&run.bundle)) else {
        return (
            0,
            finding(
                Verdict::Inconclusive,
                "fresh-value separation does not yield bundles".into(),
            ),
        );
    };
    for (k, comp) in fam.components.iter().enumerate() {
        let cb = component_bundle(&run.bundle, comp);
        let imgs = bundle_images(a, &cb, IMAGE_CAP);
        if imgs.is_empty() {
            return (
                k + 1,
                finding(Verdict::Fail, format!("component {k} has no image")),
            );
        }
        for img in &imgs {
            if !envs.iter().any(|e| initial_embedding(img, e).is_some()) {
                let shown: Vec<String> = img
                    .strands
                    .values()
                    .map(|s| {
                        let t: Vec<String> = s.trace.iter().map(|d| d.to_string()).collect();
                        format!("{}: {}", s.label, t.join(" "))
                    })
                    .collect();
                return (
                    k + 1,
                    finding(
                        Verdict::Fail,
                        format!(
                            "image of component {k} is not a prefix of any abstract bundle: {}",
                            shown.join(" | ")
                        ),
                    ),
                );
            }
        }
        if imgs.len() >= IMAGE_CAP {
            return (
                k + 1,
                finding(
                    Verdict::Inconclusive,
                    format!("component {k} has more than {IMAGE_CAP} images"),
                ),
            );
        }
    }
    (fam.components.len(), None)
}

fn clause2(
    a: &AbstractionMap,
    envs: &[Bundle<AbsEvent>],
    runs: &[Execution],
    truncated: bool,
) -> Clause2 {
    let results: Vec<(usize, Option<Finding>)> = runs
        .par_iter()
        .enumerate()
        .map(|(j, r)| clause2_one(a, envs, j, r))
        .collect();
    let components_checked = results.iter().map(|r| r.0).sum();
    let findings: Vec<Finding> = results.into_iter().filter_map(|r| r.1).collect();
    let mut verdict = findings
        .iter()
        .map(|f| f.verdict)
        .max()
        .unwrap_or(Verdict::Pass);
    if truncated {
        verdict = verdict.max(Verdict::Inconclusive);
    }
    Clause2 {
        verdict,
        executions_checked: runs.len(),
        components_checked,
        findings,
    }
}

/// Bounded faithfulness of `p` to `c` under `a`. Clause 1: every abstract
/// bundle (markers dropped) is isomorphic to an image of an enumerated
/// bundle or of one of its separated sessions. Clause 2: every enumerated
/// bundle separates into components whose every image embeds as an initial
/// sub-bundle of a substituted abstract bundle. Both hold only at the given bounds.
pub fn check_faithfulness(
    p: &Protocol,
    c: &Choreography,
    a: &AbstractionMap,
    bounds: Bounds,
    jobs: usize,
) -> Result<FaithfulnessReport, FaithfulError> {
    let envs: Vec<Bundle<AbsEvent>> = abs(c)?
        .into_iter()
        .map(|e| strip_markers(&e.bundle))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| FaithfulError::Pool(e.to_string()))?;
    let en = enumerate_bundles(p, bounds);
    let truncated = en.stats.truncated;
    let (c1, c2) = pool.install(|| {
        (
            clause1(a, &envs, &en.bundles, truncated),
            clause2(a, &envs, &en.bundles, truncated),
        )
    });
    Ok(FaithfulnessReport {
        schema: 1,
        bounds,
        enumeration: en.stats,
        abstract_bundles: envs.len(),
        concrete_bundles: en.bundles.len(),
        verdict: c1.verdict.max(c2.verdict),
        clause1: c1,
        clause2: c2,
        note: "verdicts hold for the stated bounds only",
    })
}
