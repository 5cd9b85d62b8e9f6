//! Canonical XML encoding of inter-domain messages.
//!
//! One message per document:
//!
//! ```text
//! <bb from="bbA" to="bbB"><ai edge="eC" class="0" bw_kbps="50000" avg_us="15000" max_us="28000" jitter_us="3000" loss="0.0298000000" origin="bbC" valid_until="900000"/></bb>
//! ```
//!
//! The encoder writes attributes in a fixed order with no whitespace between
//! elements. The decoder accepts any attribute order and whitespace.

use std::collections::BTreeMap;

use quick_xml::events::{BytesStart, Event};
use quick_xml::escape::escape;
use quick_xml::Reader;
use thiserror::Error;

use crate::demand::{AggregatedDs, RejectionNotice};
use crate::propagation::{InterDomainMessage, MessageBody};
use crate::qos::AvailabilityInfo;
use crate::types::{BrokerId, DomainId, Kbps, LossProb, Micros, ServiceClass, SimTime};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("XML parse error at byte {position}: {message}")]
    Parse { position: u64, message: String },
    #[error("schema error at byte {position}: {message}")]
    Schema { position: u64, message: String },
}

const AI_ATTRS: [&str; 9] = [
    "edge",
    "class",
    "bw_kbps",
    "avg_us",
    "max_us",
    "jitter_us",
    "loss",
    "origin",
    "valid_until",
];
const DS_ATTRS: [&str; 5] = ["dest", "class", "bw_kbps", "term", "origin"];
const REJECT_ATTRS: [&str; 6] = ["dest", "class", "bw_kbps", "term", "origin", "by"];

/// A loss probability with exactly nine significant digits, positional
/// notation. Zero is written `0.00000000`.
pub fn format_loss(p: LossProb) -> String {
    let v = p.value();
    if v == 0.0 {
        return "0.00000000".to_owned();
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    if exp >= 0 {
        let split = (exp as usize + 1).min(digits.len());
        format!("{}.{}", &digits[..split], &digits[split..])
    } else {
        format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
    }
}

fn push_attr(out: &mut String, name: &str, value: &str) {
    out.push(' ');
    out.push_str(name);
    out.push_str("=\"");
    out.push_str(&escape(value));
    out.push('"');
}

fn encode_ai(out: &mut String, tag: &str, ai: &AvailabilityInfo) {
    out.push('<');
    out.push_str(tag);
    let values = [
        ai.edge.to_string(),
        ai.class.to_string(),
        ai.bandwidth.to_string(),
        ai.avg_delay.to_string(),
        ai.max_delay.to_string(),
        ai.jitter.to_string(),
        format_loss(ai.loss),
        ai.origin.to_string(),
        ai.valid_until.to_string(),
    ];
    for (n, v) in AI_ATTRS.iter().zip(values.iter()) {
        push_attr(out, n, v);
    }
    out.push_str("/>");
}

/// Canonical serialization of one message.
pub fn encode_message(m: &InterDomainMessage) -> String {
    let mut out = String::with_capacity(256);
    out.push_str("<bb");
    push_attr(&mut out, "from", m.from.as_str());
    push_attr(&mut out, "to", m.to.as_str());
    out.push('>');
    match &m.body {
        MessageBody::Ai(ai) => encode_ai(&mut out, "ai", ai),
        MessageBody::NewAi(ai) => encode_ai(&mut out, "newai", ai),
        MessageBody::AiDatabaseTransfer(ais) if ais.is_empty() => out.push_str("<aidb/>"),
        MessageBody::AiDatabaseTransfer(ais) => {
            out.push_str("<aidb>");
            for ai in ais {
                encode_ai(&mut out, "ai", ai);
            }
            out.push_str("</aidb>");
        }
        MessageBody::AggregatedDs(ds) => {
            out.push_str("<ds");
            let values = [
                ds.dest.to_string(),
                ds.class.to_string(),
                ds.bandwidth.to_string(),
                ds.term.to_string(),
                ds.origin.to_string(),
            ];
            for (n, v) in DS_ATTRS.iter().zip(values.iter()) {
                push_attr(&mut out, n, v);
            }
            out.push_str("/>");
        }
        MessageBody::Rejection(r) => {
            out.push_str("<reject");
            let values = [
                r.dest.to_string(),
                r.class.to_string(),
                r.bandwidth.to_string(),
                r.term.to_string(),
                r.origin.to_string(),
                r.rejected_by.to_string(),
            ];
            for (n, v) in REJECT_ATTRS.iter().zip(values.iter()) {
                push_attr(&mut out, n, v);
            }
            out.push_str("/>");
        }
    }
    out.push_str("</bb>");
    out
}

struct Attrs {
    position: u64,
    tag: String,
    values: BTreeMap<String, String>,
}

impl Attrs {
    fn read(e: &BytesStart<'_>, position: u64, allowed: &[&str]) -> Result<Self, WireError> {
        let tag = String::from_utf8_lossy(e.name().as_ref()).into_owned();
        let schema = |message: String| WireError::Schema { position, message };
        let mut values = BTreeMap::new();
        for a in e.attributes().with_checks(false) {
            let a = a.map_err(|err| WireError::Parse {
                position,
                message: err.to_string(),
            })?;
            let name = String::from_utf8_lossy(a.key.as_ref()).into_owned();
            if !allowed.contains(&name.as_str()) {
                return Err(schema(format!("unexpected attribute {name} on <{tag}>")));
            }
            let value = a
                .unescape_value()
                .map_err(|err| WireError::Parse {
                    position,
                    message: err.to_string(),
                })?
                .into_owned();
            if values.insert(name.clone(), value).is_some() {
                return Err(schema(format!("duplicate attribute {name} on <{tag}>")));
            }
        }
        for n in allowed {
            if !values.contains_key(*n) {
                return Err(schema(format!("missing attribute {n} on <{tag}>")));
            }
        }
        Ok(Self { position, tag, values })
    }

    fn schema(&self, message: String) -> WireError {
        WireError::Schema {
            position: self.position,
            message,
        }
    }

    fn str(&self, name: &str) -> Result<String, WireError> {
        let v = self.values[name].clone();
        if v.is_empty() {
            return Err(self.schema(format!("empty {name} on <{}>", self.tag)));
        }
        Ok(v)
    }

    fn num(&self, name: &str) -> Result<u64, WireError> {
        let v = &self.values[name];
        // reject signs and whitespace that str::parse would otherwise accept
        if v.is_empty() || !v.bytes().all(|b| b.is_ascii_digit()) {
            return Err(self.schema(format!("{name}=\"{v}\" is not an unsigned integer")));
        }
        v.parse()
            .map_err(|_| self.schema(format!("{name}=\"{v}\" out of range")))
    }

    fn class(&self) -> Result<ServiceClass, WireError> {
        let v = self.num("class")?;
        u32::try_from(v)
            .ok()
            .and_then(|c| ServiceClass::new(c).ok())
            .ok_or_else(|| self.schema(format!("class {v} outside 0..=63")))
    }

    fn loss(&self) -> Result<LossProb, WireError> {
        let v = &self.values["loss"];
        let p: f64 = v
            .parse()
            .map_err(|_| self.schema(format!("loss=\"{v}\" is not a number")))?;
        LossProb::new(p).map_err(|_| self.schema(format!("loss {v} outside [0, 1]")))
    }

    fn ai(&self) -> Result<AvailabilityInfo, WireError> {
        let ai = AvailabilityInfo {
            edge: DomainId::new(self.str("edge")?),
            class: self.class()?,
            bandwidth: Kbps(self.num("bw_kbps")?),
            avg_delay: Micros(self.num("avg_us")?),
            max_delay: Micros(self.num("max_us")?),
            jitter: Micros(self.num("jitter_us")?),
            loss: self.loss()?,
            origin: BrokerId::new(self.str("origin")?),
            valid_until: SimTime(self.num("valid_until")?),
        };
        if ai.avg_delay > ai.max_delay {
            return Err(self.schema(format!(
                "avg_us {} exceeds max_us {}",
                ai.avg_delay, ai.max_delay
            )));
        }
        Ok(ai)
    }
}

#[derive(PartialEq)]
enum State {
    Start,
    InRoot,
    InAidb,
    Closed,
}

/// Parses one message document.
pub fn decode_message(input: &str) -> Result<InterDomainMessage, WireError> {
    let mut reader = Reader::from_str(input);
    reader.config_mut().trim_text(true);
    let mut state = State::Start;
    let mut header: Option<(BrokerId, BrokerId)> = None;
    let mut body: Option<MessageBody> = None;
    let mut db: Vec<AvailabilityInfo> = Vec::new();
    loop {
        let position = reader.buffer_position();
        let event = reader.read_event().map_err(|e| WireError::Parse {
            position: reader.error_position(),
            message: e.to_string(),
        })?;
        let schema = |message: String| WireError::Schema { position, message };
        match event {
            Event::Decl(_) | Event::Comment(_) if state == State::Start || state == State::Closed => {}
            Event::Comment(_) => {}
            Event::Empty(_) if state == State::Start => {
                return Err(schema("<bb> carries no message".into()));
            }
            Event::Start(e) if state == State::Start => {
                if e.name().as_ref() != b"bb" {
                    return Err(schema(format!(
                        "root element must be <bb>, found <{}>",
                        String::from_utf8_lossy(e.name().as_ref())
                    )));
                }
                let a = Attrs::read(&e, position, &["from", "to"])?;
                header = Some((BrokerId::new(a.str("from")?), BrokerId::new(a.str("to")?)));
                state = State::InRoot;
            }
            Event::Empty(e) if state == State::InRoot => {
                if body.is_some() {
                    return Err(schema("more than one message body".into()));
                }
                body = Some(match e.name().as_ref() {
                    b"ai" => MessageBody::Ai(Attrs::read(&e, position, &AI_ATTRS)?.ai()?),
                    b"newai" => MessageBody::NewAi(Attrs::read(&e, position, &AI_ATTRS)?.ai()?),
                    b"aidb" => {
                        Attrs::read(&e, position, &[])?;
                        MessageBody::AiDatabaseTransfer(Vec::new())
                    }
                    b"ds" => {
                        let a = Attrs::read(&e, position, &DS_ATTRS)?;
                        MessageBody::AggregatedDs(AggregatedDs {
                            dest: DomainId::new(a.str("dest")?),
                            class: a.class()?,
                            bandwidth: Kbps(a.num("bw_kbps")?),
                            term: a.num("term")?,
                            origin: BrokerId::new(a.str("origin")?),
                        })
                    }
                    b"reject" => {
                        let a = Attrs::read(&e, position, &REJECT_ATTRS)?;
                        MessageBody::Rejection(RejectionNotice {
                            dest: DomainId::new(a.str("dest")?),
                            class: a.class()?,
                            bandwidth: Kbps(a.num("bw_kbps")?),
                            term: a.num("term")?,
                            origin: BrokerId::new(a.str("origin")?),
                            rejected_by: BrokerId::new(a.str("by")?),
                        })
                    }
                    other => {
                        return Err(schema(format!(
                            "unknown element <{}>",
                            String::from_utf8_lossy(other)
                        )))
                    }
                });
            }
            Event::Start(e) if state == State::InRoot && e.name().as_ref() == b"aidb" => {
                if body.is_some() {
                    return Err(schema("more than one message body".into()));
                }
                Attrs::read(&e, position, &[])?;
                state = State::InAidb;
            }
            Event::Empty(e) if state == State::InAidb => {
                if e.name().as_ref() != b"ai" {
                    return Err(schema(format!(
                        "<aidb> may only contain <ai>, found <{}>",
                        String::from_utf8_lossy(e.name().as_ref())
                    )));
                }
                db.push(Attrs::read(&e, position, &AI_ATTRS)?.ai()?);
            }
            Event::End(e) if state == State::InAidb && e.name().as_ref() == b"aidb" => {
                body = Some(MessageBody::AiDatabaseTransfer(std::mem::take(&mut db)));
                state = State::InRoot;
            }
            Event::End(e) if state == State::InRoot && e.name().as_ref() == b"bb" => {
                state = State::Closed;
            }
            Event::Eof => {
                if state != State::Closed {
                    return Err(WireError::Parse {
                        position,
                        message: "unexpected end of document".into(),
                    });
                }
                break;
            }
            Event::Text(t) => {
                return Err(schema(format!(
                    "unexpected text {:?}",
                    String::from_utf8_lossy(t.as_ref())
                )))
            }
            other => {
                return Err(schema(format!("unexpected {other:?}")));
            }
        }
    }
    let (from, to) = header.expect("closed root implies header");
    let body = body.ok_or(WireError::Schema {
        position: 0,
        message: "<bb> carries no message".into(),
    })?;
    Ok(InterDomainMessage { from, to, body })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::TermIndex;
    use proptest::prelude::*;

    fn ai(loss: f64) -> AvailabilityInfo {
        AvailabilityInfo {
            edge: "eC".into(),
            class: ServiceClass::new(0).unwrap(),
            bandwidth: Kbps(50_000),
            avg_delay: Micros(15_000),
            max_delay: Micros(28_000),
            jitter: Micros(3_000),
            loss: LossProb::new(loss).unwrap(),
            origin: "bbC".into(),
            valid_until: SimTime(900_000),
        }
    }

    fn msg(body: MessageBody) -> InterDomainMessage {
        InterDomainMessage {
            from: "bbA".into(),
            to: "bbB".into(),
            body,
        }
    }

    #[test]
    fn loss_formatting() {
        let f = |p: f64| format_loss(LossProb::new(p).unwrap());
        assert_eq!(f(0.0), "0.00000000");
        assert_eq!(f(1.0), "1.00000000");
        assert_eq!(f(0.5), "0.500000000");
        assert_eq!(f(0.0298), "0.0298000000");
        assert_eq!(f(1e-12), "0.00000000000100000000");
        assert_eq!(f(0.99999999999), "1.00000000");
        assert_eq!(f(0.123456789123), "0.123456789");
    }

    #[test]
    fn zero_ai_encoding() {
        let z = AvailabilityInfo {
            edge: "e".into(),
            class: ServiceClass::new(0).unwrap(),
            bandwidth: Kbps(0),
            avg_delay: Micros(0),
            max_delay: Micros(0),
            jitter: Micros(0),
            loss: LossProb::ZERO,
            origin: "b".into(),
            valid_until: SimTime(0),
        };
        assert_eq!(
            encode_message(&msg(MessageBody::Ai(z))),
            r#"<bb from="bbA" to="bbB"><ai edge="e" class="0" bw_kbps="0" avg_us="0" max_us="0" jitter_us="0" loss="0.00000000" origin="b" valid_until="0"/></bb>"#
        );
    }

    #[test]
    fn aidb_cardinality() {
        let m = msg(MessageBody::AiDatabaseTransfer(vec![ai(0.1), ai(0.2), ai(0.3)]));
        let s = encode_message(&m);
        assert_eq!(s.matches("<ai ").count(), 3);
        assert_eq!(decode_message(&s).unwrap(), m);
        let empty = msg(MessageBody::AiDatabaseTransfer(vec![]));
        assert!(encode_message(&empty).contains("<aidb/>"));
        assert_eq!(decode_message("<bb from=\"bbA\" to=\"bbB\"><aidb></aidb></bb>").unwrap(), empty);
    }

    #[test]
    fn tolerant_decoding() {
        let doc = "  <bb to=\"bbB\" from=\"bbA\">\n   <ds origin=\"bbA\" term=\"3\" bw_kbps=\"10\" class=\"5\" dest=\"eC\"/>\n </bb>\n";
        let m = decode_message(doc).unwrap();
        assert_eq!(
            encode_message(&m),
            r#"<bb from="bbA" to="bbB"><ds dest="eC" class="5" bw_kbps="10" term="3" origin="bbA"/></bb>"#
        );
    }

    #[test]
    fn schema_errors() {
        let good = encode_message(&msg(MessageBody::Ai(ai(0.01))));
        let bad_class = good.replace("class=\"0\"", "class=\"64\"");
        assert!(matches!(decode_message(&bad_class), Err(WireError::Schema { .. })));
        let missing = good.replace(" jitter_us=\"3000\"", "");
        let e = decode_message(&missing).unwrap_err();
        assert!(e.to_string().contains("jitter_us"), "{e}");
        let extra = good.replace("<ai ", "<ai colour=\"red\" ");
        assert!(matches!(decode_message(&extra), Err(WireError::Schema { .. })));
        let dup = good.replace("<ai ", "<ai edge=\"x\" ");
        assert!(decode_message(&dup).unwrap_err().to_string().contains("duplicate"));
        let loss = good.replace("loss=\"0.0100000000\"", "loss=\"1.5\"");
        assert!(matches!(decode_message(&loss), Err(WireError::Schema { .. })));
        let order = good.replace("avg_us=\"15000\"", "avg_us=\"30000\"");
        assert!(matches!(decode_message(&order), Err(WireError::Schema { .. })));
        let neg = good.replace("bw_kbps=\"50000\"", "bw_kbps=\"-1\"");
        assert!(matches!(decode_message(&neg), Err(WireError::Schema { .. })));
    }

    #[test]
    fn truncated_document_is_parse_error() {
        let good = encode_message(&msg(MessageBody::Ai(ai(0.01))));
        for cut in [10, good.len() / 2, good.len() - 3] {
            assert!(
                matches!(decode_message(&good[..cut]), Err(WireError::Parse { .. })),
                "cut at {cut}"
            );
        }
    }

    #[test]
    fn ids_are_escaped() {
        let mut a = ai(0.0);
        a.edge = "e<&\">".into();
        let m = msg(MessageBody::NewAi(a));
        let s = encode_message(&m);
        assert!(s.contains("e&lt;&amp;&quot;&gt;"));
        assert_eq!(decode_message(&s).unwrap(), m);
    }

    fn arb_id() -> impl Strategy<Value = String> {
        "[a-zA-Z][a-zA-Z0-9_.-]{0,7}"
    }

    /// Loss values that survive the nine-digit text form unchanged.
    fn arb_loss() -> impl Strategy<Value = LossProb> {
        (0u64..=999_999_999, 0i32..12).prop_map(|(m, k)| {
            let p = (m as f64 / 1e9) / 10f64.powi(k);
            LossProb::new(format_loss(LossProb::new(p).unwrap()).parse().unwrap()).unwrap()
        })
    }

    fn arb_ai() -> impl Strategy<Value = AvailabilityInfo> {
        (arb_id(), 0u32..64, any::<u64>(), 0u64..1 << 40, 0u64..1 << 40, any::<u64>(), arb_loss(), arb_id(), any::<u64>())
            .prop_map(|(e, c, bw, avg, extra, jit, loss, o, vu)| AvailabilityInfo {
                edge: DomainId::new(e),
                class: ServiceClass::new(c).unwrap(),
                bandwidth: Kbps(bw),
                avg_delay: Micros(avg),
                max_delay: Micros(avg + extra),
                jitter: Micros(jit),
                loss,
                origin: BrokerId::new(o),
                valid_until: SimTime(vu),
            })
    }

    fn arb_msg() -> impl Strategy<Value = InterDomainMessage> {
        let body = prop_oneof![
            arb_ai().prop_map(MessageBody::Ai),
            arb_ai().prop_map(MessageBody::NewAi),
            prop::collection::vec(arb_ai(), 0..5).prop_map(MessageBody::AiDatabaseTransfer),
            (arb_id(), 0u32..64, any::<u64>(), any::<TermIndex>(), arb_id()).prop_map(|(d, c, bw, t, o)| {
                MessageBody::AggregatedDs(AggregatedDs {
                    dest: DomainId::new(d),
                    class: ServiceClass::new(c).unwrap(),
                    bandwidth: Kbps(bw),
                    term: t,
                    origin: BrokerId::new(o),
                })
            }),
            (arb_id(), 0u32..64, any::<u64>(), any::<TermIndex>(), arb_id(), arb_id()).prop_map(
                |(d, c, bw, t, o, by)| {
                    MessageBody::Rejection(RejectionNotice {
                        dest: DomainId::new(d),
                        class: ServiceClass::new(c).unwrap(),
                        bandwidth: Kbps(bw),
                        term: t,
                        origin: BrokerId::new(o),
                        rejected_by: BrokerId::new(by),
                    })
                }
            ),
        ];
        (arb_id(), arb_id(), body).prop_map(|(f, t, body)| InterDomainMessage {
            from: BrokerId::new(f),
            to: BrokerId::new(t),
            body,
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn round_trip(m in arb_msg()) {
            let s = encode_message(&m);
            let back = decode_message(&s).unwrap();
            prop_assert_eq!(&back, &m);
            prop_assert_eq!(encode_message(&back), s);
        }

        #[test]
        fn nine_significant_digits(p in 1e-15f64..=1.0) {
            let s = format_loss(LossProb::new(p).unwrap());
            let sig: String = s.chars().filter(|c| c.is_ascii_digit()).skip_while(|&c| c == '0').collect();
            prop_assert_eq!(sig.len(), 9, "{}", s);
            let back: f64 = s.parse().unwrap();
            prop_assert!(((back - p) / p).abs() <= 5e-9);
        }
    }
}
