//! Connection counts for a broker-mediated network versus a full mesh.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TopologyParams {
    /// Node count.
    pub n: u64,
    /// Broker count.
    pub b: u64,
}

/// Every node holds one connection to every broker.
pub fn connection_count(t: TopologyParams) -> u64 {
    t.b * t.n
}

/// Edges of a complete graph on `n` nodes.
pub fn p2p_edge_count(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

/// Smallest `n` in `1..=n_max` where the brokered network needs strictly
/// fewer connections than a full mesh.
pub fn first_crossover(brokers: u64, n_max: u64) -> Option<u64> {
    (1..=n_max).find(|&n| connection_count(TopologyParams { n, b: brokers }) < p2p_edge_count(n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TopologyRow {
    pub n: u64,
    pub p2p_edges: u64,
    pub broker_connections: u64,
    pub crossover: bool,
}

pub fn topology_table(n_max: u64, brokers: u64) -> Vec<TopologyRow> {
    let cross = first_crossover(brokers, n_max);
    (1..=n_max)
        .map(|n| TopologyRow {
            n,
            p2p_edges: p2p_edge_count(n),
            broker_connections: connection_count(TopologyParams { n, b: brokers }),
            crossover: Some(n) == cross,
        })
        .collect()
}
