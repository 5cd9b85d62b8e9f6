//! `bbdb 1`: stored routes of every broker, one per line.
//!
//! ```text
//! bbdb 1
//! ai bbA eC 0 via=bbB bw=100000 avg=14500 max=24000 jitter=0 loss=0.004994003998 origin=bbC
//! ```
//!
//! Loss is printed so that it parses back to the same bits. `valid_until`
//! is not part of the dump.

use crate::qos::{AiKey, AvailabilityInfo};
use crate::sim::oracle::{DbView, RouteMap};
use crate::types::{BrokerId, Kbps, LossProb, Micros, NextHop, ServiceClass, SimTime};
use crate::wire::text::{exact_f64, lines, FormatErrors};

pub const MAGIC: &str = "bbdb";
pub const VERSION: u32 = 1;

fn ai_line(b: &BrokerId, ai: &AvailabilityInfo, via: &str) -> String {
    format!(
        "ai {b} {} {} via={via} bw={} avg={} max={} jitter={} loss={} origin={}\n",
        ai.edge,
        ai.class,
        ai.bandwidth,
        ai.avg_delay,
        ai.max_delay,
        ai.jitter,
        exact_f64(ai.loss.value()),
        ai.origin
    )
}

pub fn write_db(view: &DbView) -> String {
    let mut out = format!("{MAGIC} {VERSION}\n");
    for ((b, _), (ai, hop)) in view {
        out.push_str(&ai_line(b, ai, &hop.to_string()));
    }
    out
}

/// Oracle routes in the dump format; `via` lists every equally good next
/// hop, comma separated.
pub fn write_routes(routes: &RouteMap) -> String {
    let mut out = format!("{MAGIC} {VERSION}\n");
    for ((b, _), r) in routes {
        let via: Vec<String> = r.next_hops.iter().map(|h| h.to_string()).collect();
        out.push_str(&ai_line(b, &r.ai, &via.join(",")));
    }
    out
}

pub fn parse_db(text: &str) -> Result<DbView, FormatErrors> {
    let mut view = DbView::new();
    for l in lines(text, MAGIC, VERSION)? {
        if l.keyword() != "ai" {
            return Err(l.err(format!("unknown keyword '{}'", l.keyword())).into());
        }
        l.expect_words(3)?;
        l.only(&["via", "bw", "avg", "max", "jitter", "loss", "origin"])?;
        let broker: BrokerId = l.word(0, "broker")?.into();
        let class = ServiceClass::new(l.word_num(2, "class")?).map_err(|e| l.err(e.to_string()))?;
        let loss = LossProb::new(l.num("loss")?).map_err(|e| l.err(e.to_string()))?;
        let hop = match l.req("via")? {
            "local" => NextHop::Local,
            b => NextHop::Broker(b.into()),
        };
        let ai = AvailabilityInfo {
            edge: l.word(1, "edge domain")?.into(),
            class,
            bandwidth: Kbps(l.num("bw")?),
            avg_delay: Micros(l.num("avg")?),
            max_delay: Micros(l.num("max")?),
            jitter: Micros(l.num("jitter")?),
            loss,
            origin: l.req("origin")?.into(),
            valid_until: SimTime::NEVER,
        };
        let key = (broker, AiKey::new(ai.edge.clone(), class));
        if view.contains_key(&key) {
            return Err(l.err(format!("second entry for {} {}/{}", key.0, key.1.edge, class)).into());
        }
        view.insert(key, (ai, hop));
    }
    Ok(view)
}
