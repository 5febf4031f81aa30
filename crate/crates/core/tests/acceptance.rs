//! Acceptance gate. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; exits non-zero if any fails.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::SeedableRng;
use serde_json::Value;

use chorstrand::abs::{abs, check_theorem1, interactions_in_order, strip_markers, AbsEvent};
use chorstrand::chor::{check_static_assumptions, parse_choreography, Role};
use chorstrand::crypto::{
    check_deliver_once, derivable, enumerate_bundles, nonce_cache_run, Bounds, CacheVerdict,
    Protocol, Term,
};
use chorstrand::faithful::{bundle_images, AbstractionMap, IMAGE_CAP};
use chorstrand::lts::traces;
use chorstrand::strand::{
    isomorphic, validate_bundle, Bundle, DirectedTerm, NodeRef, Strand, StrandKind,
};

use common::*;

const ABS_LIMIT: Duration = Duration::from_secs(1);
const THEOREM1_LIMIT: Duration = Duration::from_secs(60);
const ENUMERATE_LIMIT: Duration = Duration::from_secs(30);
const FAITHFUL_LIMIT: Duration = Duration::from_secs(300);
const RANDOM_CHOREOGRAPHIES: u64 = 200;
const RANDOM_GRAPHS: u64 = 1000;
const SECRECY_STEPS: usize = 6;
const FAITHFUL_STEPS: usize = 4;
const READINGS_PER_BUNDLE: usize = 3;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(t: Instant, limit: Duration) -> Result<(), String> {
    ensure(
        t.elapsed() < limit,
        format!("took {:.2?}, limit {limit:?}", t.elapsed()),
    )
}

fn abs_shapes() -> Outcome {
    let t = Instant::now();
    let c = parse_choreography(CHOR).map_err(|e| e.to_string())?;
    let envs = abs(&c).map_err(|e| e.to_string())?;
    within(t, ABS_LIMIT)?;
    ensure(envs.len() == 3, format!("{} bundles", envs.len()))?;
    let ops = |b: &Bundle<AbsEvent>| -> BTreeSet<String> {
        interactions_in_order(b)
            .iter()
            .map(|m| m.op.to_string())
            .collect()
    };
    let find = |op: &str| {
        envs.iter()
            .find(|e| ops(&e.bundle).contains(op))
            .ok_or(format!("no bundle with {op}"))
    };
    let counts = |e: &chorstrand::abs::BundleEnv| {
        ["C", "S", "B"].map(|r| e.interaction_count(&Role::new(r)))
    };
    let (i, ii, iii) = (find("rcpt")?, find("nopay")?, find("refuse")?);
    ensure(counts(i) == [4, 6, 2], format!("(i) {:?}", counts(i)))?;
    ensure(counts(ii) == [4, 6, 2], format!("(ii) {:?}", counts(ii)))?;
    ensure(counts(iii) == [3, 3, 0], format!("(iii) {:?}", counts(iii)))?;
    ensure(
        iii.is_marker_only(&Role::new("B")),
        "B in (iii) has interactions",
    )?;
    Ok("3 bundles, C/S/B = 4/6/2, 4/6/2, 3/3/0".into())
}

fn theorem1() -> Outcome {
    let t = Instant::now();
    let c = parse_choreography(CHOR).map_err(|e| e.to_string())?;
    let r = check_theorem1(&c, 16);
    ensure(r.holds(), format!("buyer-seller: {:?}", r.counterexamples))?;
    let mut states = r.states;
    for seed in 0..RANDOM_CHOREOGRAPHIES {
        let c = random_choreography(&mut StdRng::seed_from_u64(seed));
        ensure(
            check_static_assumptions(&c).is_empty(),
            format!("generator produced an ill-formed choreography: {c}"),
        )?;
        let r = check_theorem1(&c, 16);
        ensure(
            r.holds(),
            format!("seed {seed}: {c}: {:?}", r.counterexamples),
        )?;
        states += r.states;
    }
    within(t, THEOREM1_LIMIT)?;
    Ok(format!(
        "buyer-seller + {RANDOM_CHOREOGRAPHIES} random, {states} states, 0 counterexamples"
    ))
}

fn lts_abs_coherence() -> Outcome {
    let mut rng = StdRng::seed_from_u64(7);
    let mut readings = 0;
    for seed in 0..RANDOM_CHOREOGRAPHIES {
        let c = random_choreography(&mut StdRng::seed_from_u64(seed));
        let expected: BTreeSet<_> = traces(&c).into_iter().collect();
        let envs = abs(&c).map_err(|e| format!("seed {seed}: {e}"))?;
        let mut got = BTreeSet::new();
        for e in &envs {
            got.insert(interactions_in_order(&e.bundle));
            for _ in 0..READINGS_PER_BUNDLE {
                let r = random_reading(&e.bundle, &mut rng);
                ensure(
                    expected.contains(&r),
                    format!("seed {seed}: reading not a trace"),
                )?;
                got.insert(r);
                readings += 1;
            }
        }
        ensure(
            got == expected,
            format!(
                "seed {seed}: {} readings vs {} traces",
                got.len(),
                expected.len()
            ),
        )?;
    }
    Ok(format!(
        "{RANDOM_CHOREOGRAPHIES} choreographies, {readings} random topological readings, exact"
    ))
}

fn diagram_strands() -> Vec<Strand<String>> {
    let s = |id: &str, t: &[(bool, &str)]| {
        let trace = t
            .iter()
            .map(|(send, m)| {
                if *send {
                    DirectedTerm::send(m.to_string())
                } else {
                    DirectedTerm::recv(m.to_string())
                }
            })
            .collect();
        Strand::new(id, StrandKind::Regular, id, trace)
    };
    vec![
        s("1", &[(true, "Hello"), (false, "Bye")]),
        s("2", &[(true, "Good luck"), (false, "Thanks")]),
        s("3", &[(false, "Good luck"), (true, "Thanks")]),
        s(
            "4",
            &[
                (false, "Hello"),
                (false, "Good luck"),
                (true, "Thanks"),
                (true, "Bye"),
            ],
        ),
        s("5", &[(false, "Thanks"), (true, "Bye")]),
    ]
}

type Edge<'a> = ((&'a str, usize), (&'a str, usize));

fn diagram(heights: &[(usize, usize)], comm: &[Edge]) -> Bundle<String> {
    let all = diagram_strands();
    let mut b = Bundle::new();
    for (k, h) in heights {
        b.add_strand(all[k - 1].clone(), *h);
    }
    for ((s, i), (t, j)) in comm {
        b.add_comm(NodeRef::new(*s, *i), NodeRef::new(*t, *j));
    }
    b
}

fn bundle_oracle() -> Outcome {
    let valid = [
        diagram(
            &[(2, 2), (3, 2)],
            &[(("2", 1), ("3", 1)), (("3", 2), ("2", 2))],
        ),
        diagram(
            &[(1, 2), (2, 2), (4, 4)],
            &[
                (("1", 1), ("4", 1)),
                (("2", 1), ("4", 2)),
                (("4", 3), ("2", 2)),
                (("4", 4), ("1", 2)),
            ],
        ),
        diagram(
            &[(1, 2), (2, 1), (4, 3), (5, 2)],
            &[
                (("1", 1), ("4", 1)),
                (("2", 1), ("4", 2)),
                (("4", 3), ("5", 1)),
                (("5", 2), ("1", 2)),
            ],
        ),
    ];
    let invalid = [
        diagram(&[(2, 2), (3, 2)], &[(("2", 1), ("3", 1))]),
        diagram(
            &[(1, 2), (2, 2), (4, 4)],
            &[
                (("2", 1), ("4", 1)),
                (("2", 1), ("4", 2)),
                (("4", 3), ("2", 2)),
                (("4", 4), ("1", 2)),
            ],
        ),
        diagram(
            &[(1, 2), (2, 1), (4, 3), (5, 2)],
            &[
                (("1", 1), ("4", 1)),
                (("2", 1), ("4", 2)),
                (("4", 3), ("5", 1)),
                (("5", 2), ("1", 2)),
                (("4", 3), ("2", 2)),
            ],
        ),
    ];
    for (k, b) in valid.iter().enumerate() {
        ensure(
            validate_bundle(b).is_empty() && naive_is_bundle(b),
            format!("diagram {} rejected", k + 1),
        )?;
    }
    for (k, b) in invalid.iter().enumerate() {
        ensure(
            !validate_bundle(b).is_empty() && !naive_is_bundle(b),
            format!("mutated diagram {} accepted", k + 1),
        )?;
    }
    let mut accepted = 0;
    for seed in 0..RANDOM_GRAPHS {
        let b = random_graph(&mut StdRng::seed_from_u64(seed));
        let lib = validate_bundle(&b).is_empty();
        ensure(
            lib == naive_is_bundle(&b),
            format!("seed {seed}: disagreement, library says {lib}"),
        )?;
        accepted += lib as usize;
    }
    ensure(
        accepted > 0 && accepted < RANDOM_GRAPHS as usize,
        "random graphs are all of one kind",
    )?;
    Ok(format!("3 diagrams + 3 mutants + {RANDOM_GRAPHS} random graphs ({accepted} bundles), 100% agreement"))
}

fn last_sent(b: &Bundle<Term>, role: &str) -> Option<String> {
    let s = b.strands.values().find(|s| s.label == role)?;
    let h = b.height(&s.id);
    s.trace[..h]
        .iter()
        .rev()
        .find(|d| d.is_send())
        .map(|d| d.msg.to_string())
}

fn crypto_enumeration() -> Outcome {
    let t = Instant::now();
    let p = Protocol::parse(PROTO).map_err(|e| e.to_string())?;
    let en = enumerate_bundles(&p, Bounds::new(1, 0));
    within(t, ENUMERATE_LIMIT)?;
    ensure(
        en.bundles.len() == 3,
        format!("{} bundles", en.bundles.len()),
    )?;
    let mut kinds = BTreeSet::new();
    for x in &en.bundles {
        ensure(validate_bundle(&x.bundle).is_empty(), "invalid bundle")?;
        // B stalls after key exchange when C refuses; C always finishes.
        let client = x
            .bundle
            .strands
            .values()
            .find(|s| s.label == "C")
            .ok_or("no client")?;
        ensure(x.complete.contains(&client.id), "client strand incomplete")?;
        let c = last_sent(&x.bundle, "C").unwrap_or_default();
        let b = last_sent(&x.bundle, "B").unwrap_or_default();
        kinds.insert(if c.contains("refuse") {
            "refuse"
        } else if b.contains("okcf") {
            "success"
        } else if b.contains("nopaycf") {
            "nopay"
        } else {
            "other"
        });
    }
    ensure(
        kinds == BTreeSet::from(["nopay", "refuse", "success"]),
        format!("{kinds:?}"),
    )?;
    Ok("3 complete runs: success, nopay, refuse".into())
}

fn secrecy() -> Outcome {
    let p = Protocol::parse(PROTO).map_err(|e| e.to_string())?;
    let en = enumerate_bundles(&p, Bounds::new(1, SECRECY_STEPS));
    ensure(!en.stats.truncated, "search truncated")?;
    let secrets = [Term::value("card"), Term::value("receipt")];
    let mut violations = 0;
    for x in &en.bundles {
        let visible: Vec<Term> = x
            .bundle
            .nodes
            .iter()
            .filter_map(|n| x.bundle.dmsg(n))
            .filter(|d| d.is_send())
            .map(|d| d.msg.clone())
            .collect();
        violations += secrets.iter().filter(|s| derivable(&visible, s)).count();
    }
    ensure(violations == 0, format!("{violations} violations"))?;
    Ok(format!(
        "{} bundles with <= {SECRECY_STEPS} adversary steps, 0 violations",
        en.bundles.len()
    ))
}

fn deliver_once() -> Outcome {
    let p = Protocol::parse(PROTO).map_err(|e| e.to_string())?;
    let term = |s: &str| p.term(s).map_err(|e| e.to_string());
    let p4 = term("{pay {pay card}Kbc@B0^C^S}Kbs@B0")?;
    let mut b = Bundle::new();
    b.add_full_strand(Strand::new(
        "S0",
        StrandKind::Regular,
        "S",
        vec![DirectedTerm::send(p4.clone())],
    ));
    b.add_full_strand(Strand::new(
        "dup",
        StrandKind::Adversary,
        "duplicate",
        vec![
            DirectedTerm::recv(p4.clone()),
            DirectedTerm::send(p4.clone()),
            DirectedTerm::send(p4.clone()),
        ],
    ));
    for r in ["B0", "B1"] {
        b.add_full_strand(Strand::new(
            r,
            StrandKind::Regular,
            "B",
            vec![DirectedTerm::recv(p4.clone())],
        ));
    }
    b.add_comm(NodeRef::new("S0", 1), NodeRef::new("dup", 1));
    b.add_comm(NodeRef::new("dup", 2), NodeRef::new("B0", 1));
    b.add_comm(NodeRef::new("dup", 3), NodeRef::new("B1", 1));
    ensure(
        validate_bundle(&b).is_empty(),
        "replay bundle is not a bundle",
    )?;
    ensure(
        !check_deliver_once(&b, "Kbs@B0"),
        "replay passes deliver-once",
    )?;
    let events = [("B0", "Kbs@B0".to_string()), ("B1", "Kbs@B0".to_string())];
    ensure(
        nonce_cache_run(&events) == [CacheVerdict::Accepted, CacheVerdict::Rejected],
        "cache accepted the replay",
    )?;

    let demo = Protocol::parse(REPLAY).map_err(|e| e.to_string())?;
    let replayed = |on: bool| -> usize {
        let en = enumerate_bundles(&demo, Bounds::new(2, 1).deliver_once(on));
        en.bundles
            .iter()
            .filter(|x| {
                !check_deliver_once(&x.bundle, "N@S0") || !check_deliver_once(&x.bundle, "N@S1")
            })
            .count()
    };
    let (off, on) = (replayed(false), replayed(true));
    ensure(off > 0, "no replay found without the requirement")?;
    ensure(
        on == 0,
        format!("{on} replays enumerated under deliver-once"),
    )?;
    let shipped = enumerate_bundles(&p, Bounds::new(1, 4));
    ensure(
        shipped.bundles.iter().all(|x| {
            ["Kbs@B0", "Kbc@B0", "Ksc@S0"]
                .iter()
                .all(|v| check_deliver_once(&x.bundle, v))
        }),
        "shipped run violates deliver-once",
    )?;
    Ok(format!("replay fails Kbs family, cache rejects 2nd delivery, replay demo: {off} violating bundle(s) off, 0 on"))
}

fn run_cli(args: &[&str]) -> Result<i32, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_chorstrand"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    out.status.code().ok_or_else(|| "killed".to_string())
}

fn faithfulness() -> Outcome {
    let t = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let report = dir.path().join("report.json");
    let steps = FAITHFUL_STEPS.to_string();
    let (proto, chor, amap) = (
        data("buyer_seller.proto"),
        data("buyer_seller.chor"),
        data("buyer_seller.amap"),
    );
    let base = [
        "faithful",
        "--chor",
        chor.as_str(),
        "--amap",
        amap.as_str(),
        "--max-instances",
        "1",
        "--adv-steps",
        steps.as_str(),
    ];
    let code = run_cli(
        &[
            &base[..],
            &[
                "--proto",
                proto.as_str(),
                "--report",
                report.to_str().unwrap(),
            ],
        ]
        .concat(),
    )?;
    within(t, FAITHFUL_LIMIT)?;
    let r: Value =
        serde_json::from_str(&std::fs::read_to_string(&report).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    ensure(code == 0, format!("exit {code}"))?;
    ensure(r["schema"] == 1, "schema")?;
    ensure(
        r["clause1"]["verdict"] == "PASS" && r["clause2"]["verdict"] == "PASS",
        "a clause did not pass",
    )?;

    // Re-validate the stored witnesses here, independently of the binary.
    let p = Protocol::parse(PROTO).map_err(|e| e.to_string())?;
    let a = AbstractionMap::parse(AMAP, &p.symbols).map_err(|e| e.to_string())?;
    let envs: Vec<_> = abs(&parse_choreography(CHOR).unwrap())
        .unwrap()
        .into_iter()
        .map(|e| strip_markers(&e.bundle))
        .collect();
    let runs = enumerate_bundles(&p, Bounds::new(1, FAITHFUL_STEPS)).bundles;
    let witnesses = r["clause1"]["witnesses"]
        .as_array()
        .cloned()
        .unwrap_or_default();
    ensure(witnesses.len() == envs.len(), "missing witnesses")?;
    for w in &witnesses {
        let (env, ex) = (
            w["env"].as_u64().unwrap() as usize,
            w["execution"].as_u64().unwrap() as usize,
        );
        ensure(
            w["revalidated"] == true,
            "witness not revalidated by the checker",
        )?;
        ensure(
            w["bundle"] == chorstrand::strand::bundle_to_json(&runs[ex].bundle),
            "stored bundle differs",
        )?;
        let ok = bundle_images(&a, &runs[ex].bundle, IMAGE_CAP)
            .iter()
            .any(|img| isomorphic(img, &envs[env]));
        ensure(ok, format!("witness for env {env} does not re-validate"))?;
    }

    let src = std::fs::read_to_string(&proto).map_err(|e| e.to_string())?;
    let mutants = [
        (
            "tag collision",
            src.replace("{reply quote}", "{rcpt quote}"),
        ),
        (
            "N2 dropped",
            src.replace("{req ?n2^C^S^B^prod}", "{req C^S^B^prod}"),
        ),
    ];
    let mut flipped = Vec::new();
    for (name, m) in mutants {
        ensure(m != src, format!("{name}: mutation did not apply"))?;
        let path = dir.path().join("mutant.proto");
        std::fs::write(&path, m).map_err(|e| e.to_string())?;
        let code = run_cli(
            &[
                &base[..],
                &[
                    "--proto",
                    path.to_str().unwrap(),
                    "--report",
                    report.to_str().unwrap(),
                ],
            ]
            .concat(),
        )?;
        ensure(code == 1 || code == 2, format!("{name}: exit {code}"))?;
        flipped.push(format!(
            "{name} -> {}",
            if code == 1 { "FAIL" } else { "INCONCLUSIVE" }
        ));
    }
    Ok(format!(
        "PASS both clauses at <= {FAITHFUL_STEPS} steps, {} witnesses re-validated; {}",
        witnesses.len(),
        flipped.join(", ")
    ))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("abs shapes", abs_shapes),
        ("step/unprefix correspondence", theorem1),
        ("lts/abs coherence", lts_abs_coherence),
        ("bundle validity oracle", bundle_oracle),
        ("crypto enumeration", crypto_enumeration),
        ("secrecy at bounds", secrecy),
        ("deliver-once", deliver_once),
        ("faithfulness end to end", faithfulness),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let (verdict, detail) = match out {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "criterion {} ({name}): {verdict}: {detail} [{:.2?}]",
            k + 1,
            t.elapsed()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
