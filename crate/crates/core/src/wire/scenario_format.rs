//! `bbscen 1`: the scenario file.
//!
//! ```text
//! bbscen 1
//! term_us 1000000
//! latency_us 100000            # default one-way latency
//! pair_latency bbA bbB 20000
//! refresh_us 1000000           # or: refresh_us off
//! validity_us 3000000
//! hold_terms 2
//! demand_cycle on
//! phase bbA 250000
//! stream d1 src=eA dest=eC class=0 kbps=10000 from=0 until=20
//! random count=5 min=1000 max=20000 within=10
//! at 1500000 join bbD
//! at 2000000 blackout bbA
//! at 3000000 demand d1 0
//! at 4000000 fault bbB LB 200000
//! ```
//!
//! Omitted settings take the library defaults, except that the refresh
//! interval follows `term_us`.

use std::collections::BTreeMap;

use crate::sim::scenario::{Action, DemandStream, RandomDemands, Scenario, ScenarioError, TimedAction};
use crate::topology::NetworkTopology;
use crate::types::{Kbps, ServiceClass, SimTime};
use crate::wire::text::{lines, FormatError, FormatErrors, Line};

pub const MAGIC: &str = "bbscen";
pub const VERSION: u32 = 1;

/// Where things were defined, for reporting validation errors.
#[derive(Debug, Default)]
struct SourceMap {
    streams: BTreeMap<String, usize>,
    actions: Vec<usize>,
    /// (line, positional words) of every setting line
    settings: Vec<(usize, Vec<String>)>,
}

fn on_off(l: &Line<'_>) -> Result<bool, FormatError> {
    match l.word(0, "on or off")? {
        "on" => Ok(true),
        "off" => Ok(false),
        other => Err(l.err(format!("{}: expected on or off, not {other}", l.keyword()))),
    }
}

fn parse(text: &str) -> Result<(Scenario, SourceMap), FormatErrors> {
    let ls = lines(text, MAGIC, VERSION)?;
    let mut s = Scenario::default();
    let mut src = SourceMap::default();
    let mut refresh_set = false;
    for l in &ls {
        let kw = l.keyword();
        if kw != "stream" && kw != "random" {
            l.only(&[])?;
        }
        if !matches!(kw, "stream" | "at") {
            src.settings.push((l.no, l.words[1..].iter().map(|w| w.to_string()).collect()));
        }
        match kw {
            "term_us" => {
                l.expect_words(1)?;
                s.term_length = l.word_num(0, "microseconds")?;
            }
            "latency_us" => {
                l.expect_words(1)?;
                s.latency = Some(l.word_num(0, "microseconds")?);
            }
            "pair_latency" => {
                l.expect_words(3)?;
                let (a, b) = (l.word(0, "broker")?, l.word(1, "broker")?);
                s.set_pair_latency(&a.into(), &b.into(), l.word_num(2, "microseconds")?);
            }
            "refresh_us" => {
                l.expect_words(1)?;
                refresh_set = true;
                s.refresh_interval = match l.word(0, "microseconds or off")? {
                    "off" => None,
                    _ => Some(l.word_num(0, "microseconds")?),
                };
            }
            "validity_us" => {
                l.expect_words(1)?;
                s.validity_window = Some(l.word_num(0, "microseconds")?);
            }
            "hold_terms" => {
                l.expect_words(1)?;
                s.hold_terms = l.word_num(0, "terms")?;
            }
            "demand_cycle" => {
                l.expect_words(1)?;
                s.demand_cycle = on_off(l)?;
            }
            "phase" => {
                l.expect_words(2)?;
                let b = l.word(0, "broker")?;
                if s.phase_offsets.insert(b.into(), l.word_num(1, "offset")?).is_some() {
                    return Err(l.err(format!("phase: {b} given twice")).into());
                }
            }
            "stream" => {
                l.expect_words(1)?;
                l.only(&["src", "dest", "class", "kbps", "from", "until"])?;
                let name = l.word(0, "stream name")?;
                let class: u32 = l.num("class")?;
                let class = ServiceClass::new(class).map_err(|e| l.err(format!("stream {name}: {e}")))?;
                s.demands.push(DemandStream {
                    name: name.to_owned(),
                    src: l.req("src")?.into(),
                    dest: l.req("dest")?.into(),
                    class,
                    bandwidth: Kbps(l.num("kbps")?),
                    from_term: l.opt_num("from")?.unwrap_or(0),
                    until_term: l.opt_num("until")?,
                });
                src.streams.entry(name.to_owned()).or_insert(l.no);
            }
            "random" => {
                l.expect_words(0)?;
                l.only(&["count", "min", "max", "within"])?;
                s.random_demands = Some(RandomDemands {
                    count: l.num("count")?,
                    min_kbps: l.num("min")?,
                    max_kbps: l.num("max")?,
                    within_terms: l.num("within")?,
                });
            }
            "at" => {
                let at = SimTime(l.word_num(0, "time")?);
                let action = match l.word(1, "action")? {
                    "join" => {
                        l.expect_words(3)?;
                        Action::Join(l.word(2, "broker")?.into())
                    }
                    "blackout" => {
                        l.expect_words(3)?;
                        Action::Blackout(l.word(2, "broker")?.into())
                    }
                    "demand" => {
                        l.expect_words(4)?;
                        Action::SetDemand {
                            stream: l.word(2, "stream")?.to_owned(),
                            bandwidth: Kbps(l.word_num(3, "kbps")?),
                        }
                    }
                    "fault" => {
                        l.expect_words(5)?;
                        Action::FaultOverReserve {
                            broker: l.word(2, "broker")?.into(),
                            link: l.word(3, "link")?.into(),
                            kbps: Kbps(l.word_num(4, "kbps")?),
                        }
                    }
                    other => return Err(l.err(format!("at: unknown action '{other}'")).into()),
                };
                s.actions.push(TimedAction { at, action });
                src.actions.push(l.no);
            }
            other => return Err(l.err(format!("unknown keyword '{other}'")).into()),
        }
    }
    if !refresh_set {
        s.refresh_interval = Some(s.term_length);
    }
    Ok((s, src))
}

/// Parses a scenario without checking it against a topology.
pub fn parse_scenario(text: &str) -> Result<Scenario, FormatErrors> {
    parse(text).map(|(s, _)| s)
}

/// Parses a scenario and validates every reference against `topo`.
pub fn parse_scenario_for(text: &str, topo: &NetworkTopology) -> Result<Scenario, FormatErrors> {
    let (s, src) = parse(text)?;
    let errs = s.validate(topo);
    if errs.is_empty() {
        return Ok(s);
    }
    let mut out: Vec<FormatError> = errs
        .iter()
        .map(|e| {
            let line = match e {
                ScenarioError::Action { index, .. } => src.actions.get(*index).copied(),
                ScenarioError::Demand { stream, .. } => src.streams.get(stream).copied(),
                ScenarioError::Config(msg) => {
                    let mentioned: Vec<&str> = msg.split_whitespace().collect();
                    src.settings
                        .iter()
                        .find(|(_, ws)| ws.iter().any(|w| mentioned.contains(&w.as_str())))
                        .map(|(n, _)| *n)
                }
                ScenarioError::Topology(_) => None,
            };
            FormatError::validation(line.unwrap_or(1), e.to_string())
        })
        .collect();
    out.sort_by_key(|e| e.line);
    Err(FormatErrors(out))
}

/// Canonical text with every setting spelled out.
pub fn write_scenario(s: &Scenario) -> String {
    let mut out = format!("{MAGIC} {VERSION}\n");
    out.push_str(&format!("term_us {}\n", s.term_length));
    out.push_str(&format!("latency_us {}\n", s.default_latency()));
    for ((a, b), us) in &s.pair_latency {
        out.push_str(&format!("pair_latency {a} {b} {us}\n"));
    }
    match s.refresh_interval {
        Some(r) => out.push_str(&format!("refresh_us {r}\n")),
        None => out.push_str("refresh_us off\n"),
    }
    if let Some(w) = s.validity_window {
        out.push_str(&format!("validity_us {w}\n"));
    }
    out.push_str(&format!("hold_terms {}\n", s.hold_terms));
    out.push_str(&format!("demand_cycle {}\n", if s.demand_cycle { "on" } else { "off" }));
    for (b, off) in &s.phase_offsets {
        out.push_str(&format!("phase {b} {off}\n"));
    }
    for d in &s.demands {
        out.push_str(&format!(
            "stream {} src={} dest={} class={} kbps={} from={}",
            d.name, d.src, d.dest, d.class, d.bandwidth, d.from_term
        ));
        if let Some(u) = d.until_term {
            out.push_str(&format!(" until={u}"));
        }
        out.push('\n');
    }
    if let Some(r) = &s.random_demands {
        out.push_str(&format!(
            "random count={} min={} max={} within={}\n",
            r.count, r.min_kbps, r.max_kbps, r.within_terms
        ));
    }
    for a in &s.actions {
        let body = match &a.action {
            Action::Join(b) => format!("join {b}"),
            Action::Blackout(b) => format!("blackout {b}"),
            Action::SetDemand { stream, bandwidth } => format!("demand {stream} {bandwidth}"),
            Action::FaultOverReserve { broker, link, kbps } => format!("fault {broker} {link} {kbps}"),
        };
        out.push_str(&format!("at {} {body}\n", a.at));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::wire::text::ErrorKind;

    const FULL: &str = "bbscen 1
term_us 500000
latency_us 40000
pair_latency bbA bbB 20000
refresh_us 500000
validity_us 1500000
hold_terms 3
demand_cycle on
phase bbA 0
stream d1 src=eA dest=eC class=0 kbps=10000 from=0 until=20
random count=5 min=1000 max=20000 within=10
at 1500000 blackout bbA
at 3000000 demand d1 0
at 4000000 fault bbB LB 200000
";

    #[test]
    fn canonical_round_trip() {
        let s = parse_scenario_for(FULL, &fixtures::line3()).unwrap();
        assert_eq!(s.term_length, 500_000);
        assert_eq!(s.latency_between(&"bbB".into(), &"bbA".into()), 20_000);
        assert_eq!(s.actions.len(), 3);
        assert_eq!(write_scenario(&s), FULL);
    }

    #[test]
    fn defaults_follow_term_length() {
        let s = parse_scenario("bbscen 1\nterm_us 200000\n").unwrap();
        assert_eq!(s.refresh_interval, Some(200_000));
        assert_eq!(s.default_latency(), 20_000);
        let s = parse_scenario("bbscen 1\nrefresh_us off\ndemand_cycle off\n").unwrap();
        assert_eq!(s, Scenario::propagation_only());
    }

    #[test]
    fn validation_errors_point_at_the_action() {
        let text = "bbscen 1\nstream d1 src=eA dest=eC class=0 kbps=1\nat 10 blackout bbQ\nat 20 demand d9 5\n";
        let e = parse_scenario_for(text, &fixtures::line3()).unwrap_err();
        assert_eq!(e.0.len(), 2);
        assert!(e.0.iter().all(|x| x.kind == ErrorKind::Validation));
        assert_eq!((e.0[0].line, e.0[1].line), (3, 4));
        assert!(e.0[0].message.contains("bbQ"));
        assert!(e.0[1].message.contains("d9"));
        let e = parse_scenario_for("bbscen 1\nphase bbZ 5\n", &fixtures::line3()).unwrap_err();
        assert_eq!(e.0[0].line, 2);
    }

    #[test]
    fn grammar_errors() {
        for (text, line) in [
            ("bbscen 1\nat 5 explode bbA\n", 2),
            ("bbscen 1\ndemand_cycle maybe\n", 2),
            ("bbscen 1\nstream d src=a dest=b class=64 kbps=1\n", 2),
            ("bbscen 1\nhold_terms 2 3\n", 2),
            ("bbscen 1\nphase bbA 1\nphase bbA 2\n", 3),
        ] {
            let e = parse_scenario(text).unwrap_err();
            assert!(e.is_parse());
            assert_eq!(e.0[0].line, line, "{text}");
        }
    }
}
