pub mod analytics;
pub mod analyzer;
pub mod appmsg;
pub mod cli;
pub mod gen;
pub mod netsim;
pub mod packet;
pub mod pcap;
pub mod probe;
pub mod selection;
pub mod prober;
