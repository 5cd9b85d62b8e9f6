//! Per-term, per-broker time series.

use crate::propagation::MessageKind;
use crate::types::{BrokerId, SimTime, TermIndex};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsRow {
    pub term: TermIndex,
    pub broker: BrokerId,
    pub time: SimTime,
    /// Messages sent by this broker during the term, indexed like
    /// [`MessageKind::ALL`].
    pub sent: [u64; 5],
    pub db_size: usize,
    pub admitted_kbps: u64,
    pub rejected_kbps: u64,
    pub admitted_count: usize,
    pub rejected_count: usize,
    pub reserved_kbps: u64,
    pub max_utilization: f64,
    pub ledger_stable: bool,
}

impl MetricsRow {
    pub fn sent_of(&self, kind: MessageKind) -> u64 {
        self.sent[kind as usize]
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metrics {
    pub rows: Vec<MetricsRow>,
}

impl Metrics {
    pub fn push(&mut self, row: MetricsRow) {
        self.rows.push(row);
    }

    pub fn for_broker<'a>(&'a self, b: &'a BrokerId) -> impl Iterator<Item = &'a MetricsRow> + 'a {
        self.rows.iter().filter(move |r| &r.broker == b)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["term", "broker", "time_us"];
        let sent: Vec<String> = MessageKind::ALL.iter().map(|k| format!("sent_{k}")).collect();
        header.extend(sent.iter().map(String::as_str));
        header.extend([
            "db_size",
            "admitted_kbps",
            "rejected_kbps",
            "admitted",
            "rejected",
            "reserved_kbps",
            "max_utilization",
            "ledger_stable",
        ]);
        w.write_record(&header).expect("in-memory write");
        for r in &self.rows {
            let mut rec = vec![r.term.to_string(), r.broker.to_string(), r.time.to_string()];
            rec.extend(r.sent.iter().map(|n| n.to_string()));
            rec.extend([
                r.db_size.to_string(),
                r.admitted_kbps.to_string(),
                r.rejected_kbps.to_string(),
                r.admitted_count.to_string(),
                r.rejected_count.to_string(),
                r.reserved_kbps.to_string(),
                format!("{:.4}", r.max_utilization),
                r.ledger_stable.to_string(),
            ]);
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_shape() {
        let mut m = Metrics::default();
        m.push(MetricsRow {
            term: 3,
            broker: "bbA".into(),
            sent: [1, 2, 3, 4, 5],
            max_utilization: 0.5,
            ..Default::default()
        });
        let csv = m.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("term,broker,time_us,sent_ai,sent_newai"));
        assert!(lines[1].starts_with("3,bbA,0,1,2,3,4,5,"));
        assert_eq!(lines[0].split(',').count(), lines[1].split(',').count());
        assert_eq!(m.rows[0].sent_of(MessageKind::Ds), 4);
    }
}
