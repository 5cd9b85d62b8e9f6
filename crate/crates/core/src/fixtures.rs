//! Small hand-built topologies used by tests, benches and the examples in
//! the README.

use crate::topology::{LinkKind, NetworkTopology};

/// Three transit domains in a line, `A - B - C`, with an edge domain on each.
///
/// ```text
///   eA -- A1 -LA- A2 -LAB- B1 -LB- B2 -LBC- C1 -LC- C2 -- eC
///                          |
///                          eB
/// ```
pub fn line3() -> NetworkTopology {
    use LinkKind::*;
    NetworkTopology::builder()
        .transit("A", "bbA")
        .transit("B", "bbB")
        .transit("C", "bbC")
        .edge("eA", &[0])
        .edge("eB", &[0])
        .edge("eC", &[0])
        .router("A1", "A")
        .router("A2", "A")
        .router("B1", "B")
        .router("B2", "B")
        .router("C1", "C")
        .router("C2", "C")
        .router("eA1", "eA")
        .router("eB1", "eB")
        .router("eC1", "eC")
        .simple_link("LA", "A1", "A2", Intra, 100_000, 1_000, 2_000, 0.001)
        .simple_link("LB", "B1", "B2", Intra, 100_000, 1_000, 2_000, 0.001)
        .simple_link("LC", "C1", "C2", Intra, 100_000, 1_000, 2_000, 0.001)
        .simple_link("LAB", "A2", "B1", Inter, 100_000, 5_000, 8_000, 0.002)
        .simple_link("LBC", "B2", "C1", Inter, 100_000, 5_000, 8_000, 0.002)
        .simple_link("LeA", "eA1", "A1", Inter, 100_000, 500, 1_000, 0.0)
        .simple_link("LeB", "eB1", "B1", Inter, 100_000, 500, 1_000, 0.0)
        .simple_link("LeC", "C2", "eC1", Inter, 100_000, 500, 1_000, 0.0)
        .build()
}

/// Two routes from `A` to `D`: a fast one through `B` whose `B -> D` link
/// is narrow, and a slower one through `C` (which has no edge domains).
///
/// ```text
///        B1 --LBD(50M)-- D1
///       /                |
///  eA- A1 ----- C1 ----- D2 -- eD
///       eB hangs off B1
/// ```
pub fn parallel_routes() -> NetworkTopology {
    use LinkKind::*;
    NetworkTopology::builder()
        .transit("A", "bbA")
        .transit("B", "bbB")
        .transit("C", "bbC")
        .transit("D", "bbD")
        .edge("eA", &[0])
        .edge("eB", &[0])
        .edge("eD", &[0])
        .router("A1", "A")
        .router("B1", "B")
        .router("C1", "C")
        .router("D1", "D")
        .router("D2", "D")
        .router("eA1", "eA")
        .router("eB1", "eB")
        .router("eD1", "eD")
        .simple_link("LAB", "A1", "B1", Inter, 100_000, 2_000, 3_000, 0.0)
        .simple_link("LAC", "A1", "C1", Inter, 100_000, 6_000, 9_000, 0.0)
        .simple_link("LBD", "B1", "D1", Inter, 50_000, 2_000, 3_000, 0.0)
        .simple_link("LCD", "C1", "D2", Inter, 100_000, 6_000, 9_000, 0.0)
        .simple_link("LD", "D1", "D2", Intra, 200_000, 100, 200, 0.0)
        .simple_link("LeA", "eA1", "A1", Inter, 100_000, 500, 1_000, 0.0)
        .simple_link("LeB", "eB1", "B1", Inter, 100_000, 500, 1_000, 0.0)
        .simple_link("LeD", "D2", "eD1", Inter, 100_000, 500, 1_000, 0.0)
        .build()
}

/// A transit domain `N` whose crossing cost depends on where traffic
/// enters. From `N`'s own border the route through `P` is best, but traffic
/// arriving from `Z` at `n1` does much better leaving through `Q`.
///
/// ```text
///            n2 -- P -- O -- eO
///      long /          /
///  Z -- n1             |
///      short\          |
///            n3 -- Q --+
/// ```
pub fn ingress_dependent() -> NetworkTopology {
    use LinkKind::*;
    NetworkTopology::builder()
        .transit("Z", "bbZ")
        .transit("N", "bbN")
        .transit("P", "bbP")
        .transit("Q", "bbQ")
        .transit("O", "bbO")
        .edge("eO", &[0])
        .router("z1", "Z")
        .router("n1", "N")
        .router("n2", "N")
        .router("n3", "N")
        .router("p1", "P")
        .router("q1", "Q")
        .router("o1", "O")
        .router("eO1", "eO")
        .simple_link("Ln12", "n1", "n2", Intra, 100_000, 50_000, 60_000, 0.0)
        .simple_link("Ln13", "n1", "n3", Intra, 100_000, 100, 200, 0.0)
        .simple_link("LZN", "z1", "n1", Inter, 100_000, 1_000, 2_000, 0.0)
        .simple_link("LNP", "n2", "p1", Inter, 100_000, 500, 1_000, 0.0)
        .simple_link("LNQ", "n3", "q1", Inter, 100_000, 2_000, 3_000, 0.0)
        .simple_link("LPO", "p1", "o1", Inter, 100_000, 500, 1_000, 0.0)
        .simple_link("LQO", "q1", "o1", Inter, 100_000, 2_000, 3_000, 0.0)
        .simple_link("LeO", "o1", "eO1", Inter, 100_000, 500, 1_000, 0.0)
        .build()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_valid() {
        assert_eq!(line3().validate(), vec![]);
        assert_eq!(parallel_routes().validate(), vec![]);
        assert_eq!(ingress_dependent().validate(), vec![]);
    }
}
