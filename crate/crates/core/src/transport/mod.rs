//! Pub-sub transport replacing peer-to-peer links, plus the connection-count
//! model comparing the two.

mod broker;
mod inbox;
mod topology;

pub use broker::{
    Ack, AckMode, Broker, BrokerConfig, BrokerError, Compression, Consumer, LatencyInjection,
    Message, TopicHandle, Visibility,
};
pub use inbox::TimedInbox;
pub use topology::{
    connection_count, first_crossover, p2p_edge_count, topology_table, TopologyParams, TopologyRow,
};
