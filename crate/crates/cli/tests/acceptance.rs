//! Release acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use shield_core::analytics::{correlation_report, pearson};
use shield_core::dissemination::{
    default_filter, DistressMessage, MessageFilter, MessageKind, MsgId, FRAME_LEN, MAX_PAYLOAD,
};
use shield_core::encounter::EncounterMatrices;
use shield_core::protocol::ScanPolicy;
use shield_core::simulator::{
    run, run_with_log, IncidentSpec, LogEvent, MetricsReport, ServiceAssignment, SimConfig,
    StaticNode, StaticWorld, WorldSource,
};
use shield_core::trace_io::{
    generate_synthetic_world, write_crime_log, CrimeRecord, EncounterEvent, SyntheticWorldConfig,
};
use shield_core::trust::{
    ClassMask, ServiceMask, ServiceTag, TrustClass, TrustMatrix, TrustParams,
};
use shield_core::{LocationId, NodeId};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(cond: bool, ok: String, bad: String) -> Outcome {
    if cond {
        Ok(ok)
    } else {
        Err(bad)
    }
}

fn within(elapsed: Duration, limit_s: f64, what: &str) -> Result<(), String> {
    if elapsed.as_secs_f64() < limit_s {
        Ok(())
    } else {
        Err(format!(
            "{what} took {:.2}s, limit {limit_s}s",
            elapsed.as_secs_f64()
        ))
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn incident(time_s: u64, node: u64) -> IncidentSpec {
    IncidentSpec {
        time_s,
        node: NodeId(node),
        kind: MessageKind::Emergency,
        severity: 128,
        payload: "help".into(),
        filter: None,
    }
}

fn random_message(rng: &mut ChaCha8Rng) -> DistressMessage {
    const CHARS: &[char] = &['a', 'Z', '0', ' ', '!', '\u{0}', 'é', '€', '~'];
    let max_hops = rng.random();
    let target = rng.random_range(0..=MAX_PAYLOAD);
    let mut payload = String::new();
    loop {
        let c = CHARS[rng.random_range(0..CHARS.len())];
        if payload.len() + c.len_utf8() > target {
            break;
        }
        payload.push(c);
    }
    while payload.ends_with('\u{0}') {
        payload.pop();
    }
    DistressMessage {
        msg_id: MsgId(rng.random()),
        origin: NodeId(rng.random()),
        kind: if rng.random() {
            MessageKind::Emergency
        } else {
            MessageKind::Alert
        },
        severity: rng.random(),
        hop_count: rng.random_range(0..=max_hops),
        max_hops,
        ttl_s: rng.random(),
        created_at: rng.random(),
        filter: MessageFilter {
            classes: ClassMask::from_bits_truncate(rng.random()),
            service: rng.random(),
            services: ServiceMask::from_bits_truncate(rng.random()),
        },
        location: LocationId(rng.random()),
        payload,
    }
}

fn wire_format() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(184);
    for k in 0..10_000 {
        let msg = random_message(&mut rng);
        let frame = msg.encode().map_err(|e| format!("message {k}: {e}"))?;
        if frame.len() != FRAME_LEN {
            return Err(format!("message {k} encoded to {} bytes", frame.len()));
        }
        let back = DistressMessage::decode(&frame).map_err(|e| format!("message {k}: {e}"))?;
        if back != msg {
            return Err(format!("message {k} did not roundtrip"));
        }
    }
    let golden: Vec<u8> = include_str!("../../core/tests/golden/distress_v1.hex")
        .lines()
        .flat_map(|l| hex::decode(l.trim()).expect("golden hex"))
        .collect();
    let decoded = DistressMessage::decode(&golden).map_err(|e| format!("golden: {e}"))?;
    let reencoded = decoded.encode().map_err(|e| format!("golden: {e}"))?;
    if reencoded[..] != golden[..]
        || decoded.payload != "HELP parking garage B"
        || decoded.severity != 200
    {
        return Err("golden frame mismatch".into());
    }
    within(start.elapsed(), 5.0, "wire roundtrips")?;
    Ok(format!(
        "10000 frames of {FRAME_LEN} bytes roundtrip, golden frame matches, {:.2?}",
        start.elapsed()
    ))
}

fn friend_pair(seed: u64, positions: Option<([f64; 2], [f64; 2])>) -> SimConfig {
    let node = |id, p: Option<[f64; 2]>| StaticNode {
        id: NodeId(id),
        location: LocationId(1),
        position: p,
    };
    let world = StaticWorld {
        nodes: vec![
            node(0, positions.map(|p| p.0)),
            node(1, positions.map(|p| p.1)),
        ],
        history: vec![EncounterEvent::new(NodeId(0), NodeId(1), 0, 600, LocationId(1)).unwrap()],
        crimes: Vec::new(),
    };
    let mut cfg = SimConfig::new(seed, 120, WorldSource::Static(world));
    cfg.incidents.push(incident(0, 0));
    cfg
}

fn one_hop_latency() -> Outcome {
    let start = Instant::now();
    let samples: Vec<Option<f64>> = (0..1000u64)
        .into_par_iter()
        .map(|seed| run(&friend_pair(seed, None)).map(|r| r.incidents[0].response_time_s))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let samples: Vec<f64> = samples
        .into_iter()
        .collect::<Option<_>>()
        .ok_or("a run had no delivery")?;
    let m = mean(&samples);
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    within(start.elapsed(), 10.0, "1000 one-hop runs")?;
    check(
        (15.0..=20.0).contains(&m) && lo >= 13.0 && hi <= 20.0,
        format!(
            "1000 deliveries, mean {m:.3}s, range [{lo:.3}, {hi:.3}]s, {:.2?}",
            start.elapsed()
        ),
        format!("mean {m:.3}s, range [{lo:.3}, {hi:.3}]s"),
    )
}

fn discover_latencies(log: &[shield_core::simulator::LogRecord]) -> Vec<(f64, u64)> {
    log.iter()
        .filter_map(|r| match r.event {
            LogEvent::Discover {
                distance_m,
                latency_ms,
                ..
            } => Some((distance_m, latency_ms)),
            _ => None,
        })
        .collect()
}

fn range_cutoff() -> Outcome {
    let mut far_deliveries = 0;
    let mut far_discoveries = 0;
    for seed in 0..100 {
        let mut cfg = friend_pair(
            seed,
            Some(([0.0, 0.0], [50.0 + 0.1 * (seed + 1) as f64, 0.0])),
        );
        cfg.duration_s = 600;
        let out = run_with_log(&cfg).map_err(|e| e.to_string())?;
        far_deliveries += out.report.delivery_count;
        far_discoveries += discover_latencies(&out.log).len();
    }
    let mut discoveries = Vec::new();
    for seed in 0..50 {
        discoveries.extend(discover_latencies(
            &run_with_log(&friend_pair(seed, None)).unwrap().log,
        ));
        let mut cfg = privacy_config(seed);
        cfg.duration_s = 4 * 3600;
        discoveries.extend(discover_latencies(
            &run_with_log(&cfg).map_err(|e| e.to_string())?.log,
        ));
    }
    let bad = discoveries
        .iter()
        .filter(|&&(d, l)| !(6000..=10_000).contains(&l) || d > 50.0)
        .count();
    check(
        far_deliveries == 0 && far_discoveries == 0 && bad == 0 && !discoveries.is_empty(),
        format!(
            "0 deliveries beyond 50 m over 100 runs; {} discoveries all within [6, 10]s",
            discoveries.len()
        ),
        format!("{far_deliveries} far deliveries, {far_discoveries} far discoveries, {bad} out-of-band latencies"),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn community_separation() -> Outcome {
    let start = Instant::now();
    let cfg = SyntheticWorldConfig::new(40, 4, 12, 7 * 86_400, 0.8, 42);
    let world = generate_synthetic_world(&cfg).map_err(|e| e.to_string())?;
    let community = world.community_map();
    let matrix = TrustMatrix::build(
        &EncounterMatrices::from_events(&world.encounters),
        community.keys().copied(),
        std::iter::empty(),
        TrustParams::default(),
    )
    .map_err(|e| e.to_string())?;
    let (mut same, mut cross, mut close) = (Vec::new(), Vec::new(), 0usize);
    for (&i, &ci) in &community {
        for (&j, &cj) in &community {
            if i == j {
                continue;
            }
            let s = matrix.score(i, j).value();
            if ci == cj {
                same.push(s);
                close += (matrix.class(i, j) >= TrustClass::Acquaintance) as usize;
            } else {
                cross.push(s);
            }
        }
    }
    let frac = close as f64 / same.len() as f64;
    let (ms, mc) = (median(same), median(cross));
    within(start.elapsed(), 30.0, "separation check")?;
    check(
        ms > mc && frac >= 0.9,
        format!(
            "median same {ms:.3} > cross {mc:.3}; {:.1}% same-community pairs Friend/Acquaintance",
            frac * 100.0
        ),
        format!("median same {ms:.3}, cross {mc:.3}, close fraction {frac:.3}"),
    )
}

fn twenty_worlds() -> Vec<shield_core::trace_io::SyntheticWorld> {
    (0..20u64)
        .into_par_iter()
        .map(|seed| {
            generate_synthetic_world(&SyntheticWorldConfig::new(40, 4, 12, 7 * 86_400, 0.8, seed))
                .unwrap()
        })
        .collect()
}

fn definitional_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

fn correlation(worlds: &[shield_core::trace_io::SyntheticWorld]) -> Outcome {
    let rs: Vec<f64> = worlds
        .iter()
        .map(|w| correlation_report(&w.crimes, &w.density).map(|r| r.pearson_r))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let m = mean(&rs);
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x: Vec<f64> = (0..24).map(|_| rng.random_range(-100.0..100.0)).collect();
        let y: Vec<f64> = (0..24).map(|_| rng.random_range(-100.0..100.0)).collect();
        let r = pearson(&x, &y).map_err(|e| e.to_string())?;
        worst = worst.max((r - definitional_pearson(&x, &y)).abs());
    }
    check(
        (0.50..=0.60).contains(&m) && worst <= 1e-12,
        format!("mean pearson_r {m:.4} over 20 seeds; oracle max error {worst:.1e}"),
        format!("mean pearson_r {m:.4}, oracle max error {worst:.1e}"),
    )
}

fn midnight_peak(worlds: &[shield_core::trace_io::SyntheticWorld]) -> Outcome {
    let peaks: Vec<u8> = worlds
        .iter()
        .map(|w| correlation_report(&w.crimes, &w.density).map(|r| r.peak_crime_hour))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let hits = peaks
        .iter()
        .filter(|h| [22, 23, 0, 1, 2].contains(h))
        .count();
    check(
        hits >= 18,
        format!("{hits}/20 seeds peak at night hours {peaks:?}"),
        format!("only {hits}/20 night peaks: {peaks:?}"),
    )
}

fn privacy_config(seed: u64) -> SimConfig {
    let w = SyntheticWorldConfig::new(30, 3, 10, 3 * 86_400, 0.8, seed / 5);
    let mut cfg = SimConfig::new(seed, 8 * 3600, WorldSource::Synthetic(w));
    cfg.services = vec![
        ServiceAssignment {
            node: NodeId(4),
            tag: ServiceTag::Medical,
        },
        ServiceAssignment {
            node: NodeId(17),
            tag: ServiceTag::Security,
        },
        ServiceAssignment {
            node: NodeId(25),
            tag: ServiceTag::Vigil,
        },
    ];
    let filters = [
        None,
        Some(MessageFilter {
            classes: ClassMask::FRIEND,
            service: false,
            services: ServiceMask::empty(),
        }),
        Some(MessageFilter {
            classes: ClassMask::empty(),
            service: true,
            services: ServiceMask::MEDICAL,
        }),
        Some(MessageFilter {
            classes: ClassMask::ACQUAINTANCE | ClassMask::STRANGER,
            service: true,
            services: ServiceMask::SECURITY,
        }),
    ];
    for k in 0..6u64 {
        let mut inc = incident(900 + 4000 * k, (seed * 7 + k * 11) % 30);
        inc.kind = if k % 2 == 0 {
            MessageKind::Emergency
        } else {
            MessageKind::Alert
        };
        inc.severity = (seed * 37 + k * 61) as u8;
        inc.filter = filters[((seed + k) % 4) as usize];
        cfg.incidents.push(inc);
    }
    cfg
}

/// Deliveries in the log whose recipient the filter excludes, judged by a
/// trust matrix rebuilt from the generated world.
fn audit_deliveries(cfg: &SimConfig, log: &[shield_core::simulator::LogRecord]) -> usize {
    let WorldSource::Synthetic(w) = &cfg.world else {
        unreachable!()
    };
    let world = generate_synthetic_world(w).unwrap();
    let trust = TrustMatrix::build(
        &EncounterMatrices::from_events(&world.encounters),
        (0..w.n_nodes as u64).map(NodeId),
        cfg.services.iter().map(|s| (s.node, s.tag)),
        cfg.trust,
    )
    .unwrap();
    let mut filter_of = BTreeMap::new();
    let mut bad = 0;
    for rec in log {
        match &rec.event {
            LogEvent::Incident { index, msg, .. } => {
                let spec = &cfg.incidents[*index];
                filter_of.insert(
                    *msg,
                    spec.filter.unwrap_or_else(|| default_filter(spec.kind)),
                );
            }
            LogEvent::Deliver { from, msg, .. } => {
                let f = filter_of[msg];
                let class_ok = f.classes.contains(trust.class(*from, rec.node).mask());
                let tag = trust.service_tag(rec.node);
                let service_ok =
                    f.service && tag != ServiceTag::None && f.services.contains(tag.mask());
                bad += !(class_ok || service_ok) as usize;
            }
            _ => {}
        }
    }
    bad
}

fn privacy() -> Outcome {
    let runs: Vec<(MetricsReport, usize)> = (0..60u64)
        .into_par_iter()
        .map(|seed| {
            let cfg = privacy_config(seed);
            run_with_log(&cfg).map(|out| (out.report, audit_deliveries(&cfg, &out.log)))
        })
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let violations: u64 = runs.iter().map(|r| r.0.privacy_violations).sum();
    let audited: usize = runs.iter().map(|r| r.1).sum();
    let deliveries: u64 = runs.iter().map(|r| r.0.delivery_count).sum();
    let transfers: u64 = runs.iter().map(|r| r.0.messages_transmitted).sum();
    check(
        violations == 0 && audited == 0 && deliveries > 0,
        format!("0 violations over 60 runs, log audit clean ({deliveries} accepted deliveries, {transfers} transfers)"),
        format!("{violations} counted and {audited} audited violations over 60 runs"),
    )
}

/// Replays a generated trace whose crimes all sit at a location no node visits.
fn low_risk_config(dir: &Path, seed: u64) -> SimConfig {
    let wcfg = SyntheticWorldConfig::new(30, 3, 10, 2 * 86_400, 0.8, 100 + seed);
    let world = generate_synthetic_world(&wcfg).unwrap();
    world.write_to_dir(dir).unwrap();
    let crimes: Vec<CrimeRecord> = world
        .crimes
        .iter()
        .map(|c| CrimeRecord {
            location: LocationId(wcfg.n_locations + 5),
            ..c.clone()
        })
        .collect();
    write_crime_log(
        std::fs::File::create(dir.join("crime.csv")).unwrap(),
        &crimes,
    )
    .unwrap();
    let mut cfg = SimConfig::new(
        seed,
        86_400,
        WorldSource::Traces {
            encounters: dir.join("encounters.csv"),
            crime: Some(dir.join("crime.csv")),
        },
    );
    // victims are mid-encounter so both policies have someone to reach
    let mut used = BTreeSet::new();
    for e in world
        .encounters
        .iter()
        .filter(|e| e.start > 600 && e.end() < 86_000 && e.duration >= 600)
    {
        if cfg.incidents.len() == 8 {
            break;
        }
        if used.insert(e.start / 7200) {
            cfg.incidents.push(incident(e.start + 60, e.node_a.0));
        }
    }
    cfg
}

fn adaptive_energy() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let rows: Vec<(f64, f64, Vec<f64>, Vec<f64>)> = (0..8u64)
        .map(|seed| {
            let dir = tmp.path().join(seed.to_string());
            std::fs::create_dir_all(&dir).unwrap();
            let adaptive = low_risk_config(&dir, seed);
            let mut baseline = adaptive.clone();
            baseline.scan =
                ScanPolicy::fixed(adaptive.scan.i_min_s, adaptive.scan.emergency_interval_s);
            let (a, b) = (run(&adaptive)?, run(&baseline)?);
            let delays = |r: &MetricsReport| {
                r.incidents
                    .iter()
                    .filter_map(|i| i.response_time_s)
                    .collect()
            };
            Ok((a.total_energy, b.total_energy, delays(&a), delays(&b)))
        })
        .collect::<Result<_, shield_core::Error>>()
        .map_err(|e| e.to_string())?;
    let ea: f64 = rows.iter().map(|r| r.0).sum();
    let eb: f64 = rows.iter().map(|r| r.1).sum();
    let da: Vec<f64> = rows.iter().flat_map(|r| r.2.clone()).collect();
    let db: Vec<f64> = rows.iter().flat_map(|r| r.3.clone()).collect();
    if da.is_empty() || db.is_empty() {
        return Err(format!(
            "no detections: adaptive {}, baseline {}",
            da.len(),
            db.len()
        ));
    }
    let (ma, mb) = (mean(&da), mean(&db));
    let ratio = ea / eb;
    check(
        ratio <= 0.7 && ma <= 2.0 * mb,
        format!(
            "energy ratio {ratio:.3}; mean delay {ma:.2}s vs baseline {mb:.2}s ({} and {} detections)",
            da.len(),
            db.len()
        ),
        format!("energy ratio {ratio:.3}, delay {ma:.2}s vs {mb:.2}s"),
    )
}

fn shield(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shield"))
        .args(args)
        .current_dir(cwd)
        .env("SHIELD_LOG", "off")
        .output()
        .expect("spawn shield")
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(
                    p.strip_prefix(dir).unwrap().display().to_string(),
                    std::fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}

fn cli_pass(dir: &Path) -> Result<Vec<Vec<u8>>, String> {
    std::fs::write(
        dir.join("world.json"),
        r#"{"n_nodes":20,"n_communities":4,"n_locations":10,"sim_duration_s":172800,"p_home":0.8,"rng_seed":9}"#,
    )
    .unwrap();
    std::fs::write(
        dir.join("sim.json"),
        r#"{"seed":1,"duration_s":14400,
            "world":{"traces":{"encounters":"world/encounters.csv","crime":"world/crime.csv"}},
            "services":[{"node":3,"tag":"medical"}],
            "incidents":[{"time_s":1200,"node":2,"severity":200},{"time_s":5000,"node":7,"kind":"alert"}]}"#,
    )
    .unwrap();
    std::fs::write(dir.join("services.csv"), "node,tag\n3,medical\n").unwrap();
    let runs: [&[&str]; 6] = [
        &["gen-traces", "--config", "world.json", "--out", "world"],
        &[
            "simulate", "--config", "sim.json", "--seed", "5", "--out", "m.json", "--events",
            "e.csv",
        ],
        &[
            "simulate",
            "--config",
            "sim.json",
            "--seeds",
            "1..=3",
            "--out",
            "batch/m.json",
            "--events",
            "batch/e.csv",
        ],
        &[
            "trust",
            "--encounters",
            "world/encounters.csv",
            "--node",
            "2",
            "--services",
            "services.csv",
            "--matrix-out",
            "pairs.csv",
        ],
        &[
            "rank",
            "--crime",
            "world/crime.csv",
            "--hour",
            "23",
            "--profile-out",
            "profile.json",
        ],
        &[
            "analyze",
            "--crime",
            "world/crime.csv",
            "--density",
            "world/density.csv",
            "--out",
            "report.json",
            "--spearman",
        ],
    ];
    let mut stdouts = Vec::new();
    for args in runs {
        let out = shield(args, dir);
        if !out.status.success() {
            return Err(format!(
                "{args:?} failed: {}",
                String::from_utf8_lossy(&out.stderr)
            ));
        }
        stdouts.push(out.stdout);
    }
    Ok(stdouts)
}

fn cli_determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (sa, sb) = (cli_pass(a.path())?, cli_pass(b.path())?);
    let (fa, fb) = (snapshot(a.path()), snapshot(b.path()));
    let differing: Vec<&String> = fa.keys().filter(|k| fa.get(*k) != fb.get(*k)).collect();
    check(
        sa == sb && fa.keys().eq(fb.keys()) && differing.is_empty() && fa.len() >= 14,
        format!(
            "5 commands, {} output files and all stdout identical across reruns",
            fa.len()
        ),
        format!("stdout equal: {}, differing files: {differing:?}", sa == sb),
    )
}

fn main() {
    let worlds = twenty_worlds();
    let criteria: Vec<Criterion> = vec![
        ("wire format", Box::new(wire_format)),
        ("one-hop latency band", Box::new(one_hop_latency)),
        ("range cutoff", Box::new(range_cutoff)),
        ("community trust separation", Box::new(community_separation)),
        (
            "correlation reproduction",
            Box::new(|| correlation(&worlds)),
        ),
        ("midnight crime peak", Box::new(|| midnight_peak(&worlds))),
        ("privacy invariant", Box::new(privacy)),
        ("adaptive energy", Box::new(adaptive_energy)),
        ("CLI determinism", Box::new(cli_determinism)),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({detail})", k + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
