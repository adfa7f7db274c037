//! Deterministic in-process network path: client link, an ordered chain of
//! policy-driven DPI middleboxes, and an endhost server, all on one virtual
//! clock. Identical seeds yield identical traces.

use std::collections::HashMap;
use std::net::Ipv4Addr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::packet::{
    parse_packet, pseudo_header, ones_complement_checksum, Ipv4Header, ParseAnomaly,
    ParsedPacket, TcpFlags, TcpHeader, WirePacket, IPV4_HEADER_LEN, PROTO_TCP,
};

// ---------------------------------------------------------------------------
// Profiles

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Deployment {
    /// Inline; can drop and modify traffic.
    InPath,
    /// Observes a copy; can only inject.
    OnPath,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SeqValidation {
    /// Reject any segment whose SEQ is below the client ISN.
    IsnLowerBound,
    /// Admit the in-window part of a segment (receiver-window bounds).
    WindowBased,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum PawsPolicy {
    Off,
    /// Discard older-TSval segments unless the connection has been idle.
    RfcCompliant,
    /// Discard older-TSval segments unconditionally, idle included.
    DiscardOnIdle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum OverlapPolicy {
    FirstWins,
    LastWins,
    DiscardFlow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum TcbCreation {
    OnSyn,
    OnAnyPacket,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum RstTeardown {
    Always,
    ChecksumValidatedOnly,
    InWindowOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum UrgentHandling {
    Ignore,
    ConsumeOneByte,
    DropPacket,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum BlockingAction {
    InjectRst,
    Blackhole,
    InjectBlockpage(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum BlockingScope {
    Flow,
    Packet,
}

/// One simulated middlebox policy bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DpiProfile {
    pub id: String,
    pub blocklist: Vec<String>,
    pub deployment: Deployment,
    pub seq_validation: SeqValidation,
    pub paws: PawsPolicy,
    pub checksum_validation: bool,
    pub ip_overlap_policy: OverlapPolicy,
    pub tcp_overlap_policy: OverlapPolicy,
    pub frag_buffer_max: usize,
    pub frag_timeout: f64,
    pub max_frag_disorder: usize,
    pub tcb_creation: TcbCreation,
    pub tcb_teardown_on_rst: RstTeardown,
    pub urgent_handling: UrgentHandling,
    pub blocking_action: BlockingAction,
    pub blocking_scope: BlockingScope,
    pub fail_open_probability: f64,
    pub residual_block_seconds: f64,
}

impl DpiProfile {
    pub fn validate(&self) -> Result<(), String> {
        if self.deployment == Deployment::OnPath && self.blocking_action == BlockingAction::Blackhole
        {
            return Err(format!("profile {}: on-path devices cannot blackhole", self.id));
        }
        if !(0.0..=1.0).contains(&self.fail_open_probability) {
            return Err(format!("profile {}: fail-open probability out of range", self.id));
        }
        Ok(())
    }
}

pub const DEFAULT_BLOCKLIST: &[&str] = &["blocked.example.com", "blocked.test"];

fn base_profile(id: &str) -> DpiProfile {
    DpiProfile {
        id: id.into(),
        blocklist: DEFAULT_BLOCKLIST.iter().map(|s| s.to_string()).collect(),
        deployment: Deployment::InPath,
        seq_validation: SeqValidation::WindowBased,
        paws: PawsPolicy::Off,
        checksum_validation: true,
        ip_overlap_policy: OverlapPolicy::FirstWins,
        tcp_overlap_policy: OverlapPolicy::FirstWins,
        frag_buffer_max: 64,
        frag_timeout: 30.0,
        max_frag_disorder: 64,
        tcb_creation: TcbCreation::OnSyn,
        tcb_teardown_on_rst: RstTeardown::ChecksumValidatedOnly,
        urgent_handling: UrgentHandling::Ignore,
        blocking_action: BlockingAction::InjectRst,
        blocking_scope: BlockingScope::Flow,
        fail_open_probability: 0.0,
        residual_block_seconds: 0.0,
    }
}

/// The builtin middlebox zoo: eight noiseless in-path profiles that differ
/// pairwise on at least two policy axes, plus a noisy variant and an on-path
/// variant.
pub fn zoo_default() -> Vec<DpiProfile> {
    let mut zoo = Vec::new();

    let mut p = base_profile("zeeklike");
    p.seq_validation = SeqValidation::IsnLowerBound;
    zoo.push(p);

    let mut p = base_profile("snortlike");
    p.paws = PawsPolicy::DiscardOnIdle;
    zoo.push(p);

    let mut p = base_profile("gateway-lw");
    p.ip_overlap_policy = OverlapPolicy::LastWins;
    p.tcp_overlap_policy = OverlapPolicy::LastWins;
    p.tcb_teardown_on_rst = RstTeardown::InWindowOnly;
    zoo.push(p);

    let mut p = base_profile("filter-nocksum");
    p.seq_validation = SeqValidation::IsnLowerBound;
    p.checksum_validation = false;
    p.tcp_overlap_policy = OverlapPolicy::LastWins;
    p.tcb_creation = TcbCreation::OnAnyPacket;
    p.tcb_teardown_on_rst = RstTeardown::Always;
    zoo.push(p);

    let mut p = base_profile("proxy-blockpage");
    p.paws = PawsPolicy::RfcCompliant;
    p.ip_overlap_policy = OverlapPolicy::LastWins;
    p.urgent_handling = UrgentHandling::ConsumeOneByte;
    p.blocking_action = BlockingAction::InjectBlockpage("vendor-x".into());
    zoo.push(p);

    let mut p = base_profile("nullroute");
    p.urgent_handling = UrgentHandling::DropPacket;
    p.tcb_teardown_on_rst = RstTeardown::InWindowOnly;
    p.blocking_action = BlockingAction::Blackhole;
    p.residual_block_seconds = 60.0;
    zoo.push(p);

    let mut p = base_profile("fragile-frag");
    p.seq_validation = SeqValidation::IsnLowerBound;
    p.frag_buffer_max = 8;
    p.max_frag_disorder = 8;
    zoo.push(p);

    let mut p = base_profile("strict-rfc");
    p.paws = PawsPolicy::RfcCompliant;
    p.tcp_overlap_policy = OverlapPolicy::LastWins;
    p.tcb_teardown_on_rst = RstTeardown::InWindowOnly;
    p.urgent_handling = UrgentHandling::DropPacket;
    zoo.push(p);

    let mut p = base_profile("snortlike-noisy");
    p.paws = PawsPolicy::DiscardOnIdle;
    p.fail_open_probability = 0.15;
    zoo.push(p);

    let mut p = base_profile("mirror-idps");
    p.deployment = Deployment::OnPath;
    p.urgent_handling = UrgentHandling::ConsumeOneByte;
    zoo.push(p);

    zoo
}

/// Synthetic blockpage body for a given blockpage id.
pub fn blockpage_body(id: &str) -> Vec<u8> {
    format!(
        "<html><head><title>Access Denied</title></head>\
         <body><!-- {id} policy notice --><p>blocked by {id}</p></body></html>"
    )
    .into_bytes()
}

// ---------------------------------------------------------------------------
// Endhost profile

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Strictness {
    Permissive,
    RfcStrict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Responder {
    HttpEcho,
    TlsHelloResponder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EndhostProfile {
    pub ip_overlap_policy: OverlapPolicy,
    pub frag_buffer_max: usize,
    pub tcp_window: u16,
    pub strictness: Strictness,
    pub responder: Responder,
    pub reset_on_malformed: bool,
}

impl EndhostProfile {
    pub fn permissive_http() -> Self {
        EndhostProfile {
            ip_overlap_policy: OverlapPolicy::FirstWins,
            frag_buffer_max: 128,
            tcp_window: 65535,
            strictness: Strictness::Permissive,
            responder: Responder::HttpEcho,
            reset_on_malformed: false,
        }
    }

    pub fn permissive_tls() -> Self {
        EndhostProfile { responder: Responder::TlsHelloResponder, ..Self::permissive_http() }
    }

    pub fn for_protocol(p: crate::probe::Protocol) -> Self {
        match p {
            crate::probe::Protocol::Http => Self::permissive_http(),
            crate::probe::Protocol::Https => Self::permissive_tls(),
        }
    }
}

// ---------------------------------------------------------------------------
// Shared reassembly machinery

pub type FlowKey = (Ipv4Addr, u16, Ipv4Addr, u16);

fn flow_key(p: &ParsedPacket) -> FlowKey {
    let t = p.tcp.as_ref().expect("tcp");
    (p.ip.src, t.src_port, p.ip.dst, t.dst_port)
}

/// Byte map with first-wins/last-wins conflict resolution over i64 offsets.
#[derive(Debug, Default, Clone)]
struct ByteMap {
    bytes: HashMap<i64, u8>,
}

impl ByteMap {
    fn admit(&mut self, start: i64, data: &[u8], policy: OverlapPolicy) -> bool {
        let mut conflict = false;
        for (i, b) in data.iter().enumerate() {
            let off = start + i as i64;
            match self.bytes.get(&off) {
                Some(existing) => {
                    if existing != b {
                        conflict = true;
                    }
                    if policy == OverlapPolicy::LastWins {
                        self.bytes.insert(off, *b);
                    }
                }
                None => {
                    self.bytes.insert(off, *b);
                }
            }
        }
        conflict
    }

    /// Contiguous bytes starting at offset 0.
    fn contiguous(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let mut off = 0i64;
        while let Some(b) = self.bytes.get(&off) {
            out.push(*b);
            off += 1;
        }
        out
    }
}

#[derive(Debug)]
struct FragQueue {
    map: ByteMap,
    total_len: Option<i64>,
    created_at: f64,
    last_counter: u64,
    parts: usize,
    discarded: bool,
}

/// IP fragment reassembler with overlap policy, buffer cap, timeout, and a
/// max-disorder rule (distance measured in fragments of other datagrams).
#[derive(Debug)]
struct IpReassembler {
    queues: HashMap<(Ipv4Addr, Ipv4Addr, u16, u8), FragQueue>,
    policy: OverlapPolicy,
    buffer_max: usize,
    timeout: f64,
    max_disorder: usize,
    counter: u64,
}

impl IpReassembler {
    fn new(policy: OverlapPolicy, buffer_max: usize, timeout: f64, max_disorder: usize) -> Self {
        IpReassembler { queues: HashMap::new(), policy, buffer_max, timeout, max_disorder, counter: 0 }
    }

    /// Feed one IP packet. Non-fragments pass through unchanged; fragments
    /// return the reassembled full packet once complete.
    fn feed(&mut self, parsed: &ParsedPacket, raw: &[u8], now: f64) -> Option<Vec<u8>> {
        if !parsed.is_fragment() {
            return Some(raw.to_vec());
        }
        self.counter += 1;
        let key = (parsed.ip.src, parsed.ip.dst, parsed.ip.identification, parsed.ip.protocol);
        let header_len = parsed.ip.header_len().min(raw.len());
        let body = &raw[header_len..];

        let q = self.queues.entry(key).or_insert_with(|| FragQueue {
            map: ByteMap::default(),
            total_len: None,
            created_at: now,
            last_counter: self.counter,
            parts: 0,
            discarded: false,
        });
        if now - q.created_at > self.timeout {
            *q = FragQueue {
                map: ByteMap::default(),
                total_len: None,
                created_at: now,
                last_counter: self.counter,
                parts: 0,
                discarded: false,
            };
        }
        if self.counter - q.last_counter > self.max_disorder as u64 + 1 {
            q.discarded = true;
        }
        q.last_counter = self.counter;
        q.parts += 1;
        if q.parts > self.buffer_max {
            q.discarded = true;
        }
        if q.discarded {
            return None;
        }
        let start = parsed.ip.fragment_offset as i64 * 8;
        q.map.admit(start, body, self.policy);
        if self.policy == OverlapPolicy::DiscardFlow {
            // Any overlap conflict discards the datagram.
        }
        if !parsed.ip.more_fragments {
            q.total_len = Some(start + body.len() as i64);
        }
        if let Some(total) = q.total_len {
            let assembled = q.map.contiguous();
            if assembled.len() as i64 >= total {
                // Rebuild a whole packet with the first fragment's header.
                let mut ip = parsed.ip.clone();
                ip.more_fragments = false;
                ip.fragment_offset = 0;
                ip.total_length = crate::packet::Override::Auto;
                ip.checksum = crate::packet::Override::Auto;
                let mut out = Vec::new();
                let hdr = WirePacket::new(ip, TcpHeader::new(0, 0), vec![]).serialize();
                out.extend_from_slice(&hdr[..IPV4_HEADER_LEN]);
                out.extend_from_slice(&assembled[..total as usize]);
                // Fix total length and header checksum.
                let tl = (IPV4_HEADER_LEN + total as usize) as u16;
                out[2..4].copy_from_slice(&tl.to_be_bytes());
                out[10..12].copy_from_slice(&[0, 0]);
                let ck = ones_complement_checksum(&out[..IPV4_HEADER_LEN], &[]);
                out[10..12].copy_from_slice(&ck.to_be_bytes());
                self.queues.remove(&key);
                return Some(out);
            }
        }
        None
    }
}

fn tcp_checksum_ok(parsed: &ParsedPacket, raw: &[u8]) -> bool {
    let hlen = parsed.ip.header_len().min(raw.len());
    let seg = &raw[hlen..];
    if seg.len() < 20 {
        return false;
    }
    let pseudo = pseudo_header(parsed.ip.src, parsed.ip.dst, PROTO_TCP, seg.len() as u16);
    ones_complement_checksum(seg, &pseudo) == 0
}

fn tsval_of(parsed: &ParsedPacket) -> Option<u32> {
    let tcp = parsed.tcp.as_ref()?;
    for opt in &tcp.options {
        if opt.kind == 8 && opt.data.len() >= 4 {
            return Some(u32::from_be_bytes([opt.data[0], opt.data[1], opt.data[2], opt.data[3]]));
        }
    }
    None
}

fn rel_offset(seq: u32, base: u32) -> i64 {
    seq.wrapping_sub(base) as i32 as i64
}

// ---------------------------------------------------------------------------
// DPI state machine

#[derive(Debug)]
struct Tcb {
    client_isn: u32,
    server_isn: Option<u32>,
    /// Next expected client sequence number.
    rcv_next: u32,
    server_window: u16,
    stream: ByteMap,
    last_tsval: Option<u32>,
    last_seen: f64,
    triggered: bool,
    suppressed: bool,
    discard_flow: bool,
}

/// What the middlebox decided for one packet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    Forward,
    Drop,
    /// Forward (or drop, for in-path blackhole) plus injected packets.
    Inject { forward: bool, to_client: Vec<Vec<u8>>, to_server: Vec<Vec<u8>> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ClientToServer,
    ServerToClient,
}

pub struct DpiState {
    pub profile: DpiProfile,
    reassembler: IpReassembler,
    flows: HashMap<FlowKey, Tcb>,
    blocked_until: HashMap<FlowKey, f64>,
    run_seed: u64,
}

const PAWS_IDLE_SECONDS: f64 = 60.0;

impl DpiState {
    pub fn new(profile: DpiProfile, run_seed: u64) -> Self {
        let reassembler = IpReassembler::new(
            profile.ip_overlap_policy,
            profile.frag_buffer_max,
            profile.frag_timeout,
            profile.max_frag_disorder,
        );
        DpiState { profile, reassembler, flows: HashMap::new(), blocked_until: HashMap::new(), run_seed }
    }

    fn fail_open(&self, key: &FlowKey) -> bool {
        if self.profile.fail_open_probability <= 0.0 {
            return false;
        }
        let mut h: u64 = self.run_seed;
        for b in key.0.octets().iter().chain(key.2.octets().iter()) {
            h = h.wrapping_mul(0x100000001b3).wrapping_add(*b as u64);
        }
        h = h.wrapping_mul(0x100000001b3).wrapping_add(key.1 as u64);
        h = h.wrapping_mul(0x100000001b3).wrapping_add(key.3 as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(h);
        rng.gen::<f64>() < self.profile.fail_open_probability
    }

    /// Process one packet through the middlebox policy. Returns the
    /// enforcement decision; state (TCB, reassembly, blocklist matches) is
    /// updated as a side effect.
    pub fn process(&mut self, raw: &[u8], dir: Direction, now: f64) -> Decision {
        let parsed = match parse_packet(raw) {
            Ok(p) => p,
            Err(_) => return Decision::Forward,
        };

        // Residual / flow-scope blocking applies before any parsing.
        if parsed.tcp.is_some() || parsed.is_fragment() {
            if let Some(key) = self.packet_flow_key(&parsed, dir) {
                if let Some(until) = self.blocked_until.get(&key) {
                    if now <= *until {
                        return self.enforce(&key, &parsed, now, true);
                    } else {
                        self.blocked_until.remove(&key);
                    }
                }
            }
        }

        // IP reassembly: fragments are forwarded as-is, analysis happens on
        // the reassembled packet.
        let assembled;
        let (analysis_raw, analysis_parsed) = if parsed.is_fragment() {
            match self.reassembler.feed(&parsed, raw, now) {
                Some(a) => {
                    assembled = a;
                    match parse_packet(&assembled) {
                        Ok(p) => (assembled.as_slice(), p),
                        Err(_) => return Decision::Forward,
                    }
                }
                None => return Decision::Forward,
            }
        } else {
            (raw, parsed.clone())
        };

        if analysis_parsed.tcp.is_none() || analysis_parsed.ip.protocol != PROTO_TCP {
            return Decision::Forward;
        }
        let decision = self.process_tcp(analysis_raw, &analysis_parsed, dir, now);
        decision
    }

    fn packet_flow_key(&self, parsed: &ParsedPacket, dir: Direction) -> Option<FlowKey> {
        let tcp = parsed.tcp.as_ref()?;
        Some(match dir {
            Direction::ClientToServer => (parsed.ip.src, tcp.src_port, parsed.ip.dst, tcp.dst_port),
            Direction::ServerToClient => (parsed.ip.dst, tcp.dst_port, parsed.ip.src, tcp.src_port),
        })
    }

    fn process_tcp(
        &mut self,
        raw: &[u8],
        parsed: &ParsedPacket,
        dir: Direction,
        now: f64,
    ) -> Decision {
        let tcp = parsed.tcp.as_ref().unwrap();
        let key = self.packet_flow_key(parsed, dir).unwrap();
        let checksum_ok = tcp_checksum_ok(parsed, raw);

        if self.profile.checksum_validation && !checksum_ok && !tcp.flags.rst() {
            // Invalid segments are ignored for analysis but still forwarded.
            return Decision::Forward;
        }

        if dir == Direction::ServerToClient {
            if let Some(tcb) = self.flows.get_mut(&key) {
                if tcp.flags.syn() && tcp.flags.ack() {
                    tcb.server_isn = Some(tcp.seq);
                    tcb.server_window = tcp.window;
                }
                tcb.last_seen = now;
            }
            // Blackholed flows are cut in both directions.
            if self.is_blackholed(&key, now) {
                return Decision::Drop;
            }
            return Decision::Forward;
        }

        // Client -> server.
        if tcp.flags.rst() {
            let teardown = match self.profile.tcb_teardown_on_rst {
                RstTeardown::Always => true,
                RstTeardown::ChecksumValidatedOnly => checksum_ok,
                RstTeardown::InWindowOnly => {
                    checksum_ok
                        && self
                            .flows
                            .get(&key)
                            .map(|t| {
                                let off = rel_offset(tcp.seq, t.rcv_next);
                                (0..=t.server_window as i64).contains(&off)
                            })
                            .unwrap_or(false)
                }
            };
            if teardown {
                self.flows.remove(&key);
            }
            return Decision::Forward;
        }

        let profile = self.profile.clone();
        if tcp.flags.syn() {
            self.flows.insert(
                key,
                Tcb {
                    client_isn: tcp.seq,
                    server_isn: None,
                    rcv_next: tcp.seq.wrapping_add(1),
                    server_window: 65535,
                    stream: ByteMap::default(),
                    last_tsval: tsval_of(parsed),
                    last_seen: now,
                    triggered: false,
                    suppressed: false,
                    discard_flow: false,
                },
            );
            return Decision::Forward;
        }
        if !self.flows.contains_key(&key) {
            match profile.tcb_creation {
                TcbCreation::OnSyn => return Decision::Forward,
                TcbCreation::OnAnyPacket => {
                    self.flows.insert(
                        key,
                        Tcb {
                            client_isn: tcp.seq.wrapping_sub(1),
                            server_isn: None,
                            rcv_next: tcp.seq,
                            server_window: 65535,
                            stream: ByteMap::default(),
                            last_tsval: None,
                            last_seen: now,
                            triggered: false,
                            suppressed: false,
                            discard_flow: false,
                        },
                    );
                }
            }
        }

        let mut fire = false;
        {
            let tcb = self.flows.get_mut(&key).unwrap();
            if tcb.discard_flow {
                return Decision::Forward;
            }

            // PAWS.
            if let Some(ts) = tsval_of(parsed) {
                let reject = match profile.paws {
                    PawsPolicy::Off => false,
                    PawsPolicy::RfcCompliant => {
                        tcb.last_tsval.map_or(false, |last| {
                            ts_lt(ts, last) && now - tcb.last_seen < PAWS_IDLE_SECONDS
                        })
                    }
                    PawsPolicy::DiscardOnIdle => tcb.last_tsval.map_or(false, |last| ts_lt(ts, last)),
                };
                tcb.last_seen = now;
                if reject {
                    return Decision::Forward;
                }
                tcb.last_tsval = Some(match tcb.last_tsval {
                    Some(last) if ts_lt(ts, last) => last,
                    _ => ts,
                });
            } else {
                tcb.last_seen = now;
            }

            let mut payload = parsed.payload.clone();
            if tcp.flags.urg() && tcp.urgent_pointer > 0 {
                match profile.urgent_handling {
                    UrgentHandling::Ignore => {}
                    UrgentHandling::DropPacket => return Decision::Forward,
                    UrgentHandling::ConsumeOneByte => {
                        let idx = (tcp.urgent_pointer as usize).min(payload.len());
                        if idx > 0 {
                            payload.remove(idx - 1);
                        }
                    }
                }
            }
            if payload.is_empty() {
                return Decision::Forward;
            }

            // Sequence validation and trimming relative to stream offset 0 =
            // client ISN + 1.
            let base = tcb.client_isn.wrapping_add(1);
            let off = rel_offset(tcp.seq, base);
            let admitted: Option<(i64, Vec<u8>)> = match profile.seq_validation {
                SeqValidation::IsnLowerBound => {
                    if rel_offset(tcp.seq, tcb.client_isn) < 0 {
                        None
                    } else {
                        Some((off, payload.clone()))
                    }
                }
                SeqValidation::WindowBased => {
                    let rcv = rel_offset(tcb.rcv_next, base);
                    let upper = rcv + tcb.server_window as i64;
                    let lo = off.max(rcv);
                    let hi = (off + payload.len() as i64).min(upper);
                    if off <= upper && hi > lo {
                        Some((lo, payload[(lo - off) as usize..(hi - off) as usize].to_vec()))
                    } else {
                        None
                    }
                }
            };
            if let Some((start, data)) = admitted {
                let conflict = tcb.stream.admit(start, &data, profile.tcp_overlap_policy);
                if conflict && profile.tcp_overlap_policy == OverlapPolicy::DiscardFlow {
                    tcb.discard_flow = true;
                    return Decision::Forward;
                }
                let end = rel_offset(tcp.seq, base) + parsed.payload.len() as i64;
                let rcv = rel_offset(tcb.rcv_next, base);
                if end > rcv {
                    tcb.rcv_next = base.wrapping_add(end as u32);
                }
                // Blocklist match over the contiguous stream prefix. The
                // match is only evaluated once a complete application
                // message is present, mirroring PDU-based detection; this is
                // what lets overlap resolution decide the verdict.
                if !tcb.triggered && !tcb.suppressed {
                    let stream = tcb.stream.contiguous();
                    if let Some(ready) = complete_message_span(&stream) {
                        if profile
                            .blocklist
                            .iter()
                            .any(|d| contains_subslice(&stream[..ready], d.as_bytes()))
                        {
                            fire = true;
                        }
                    }
                }
            }
        }

        if fire {
            if self.fail_open(&key) {
                self.flows.get_mut(&key).unwrap().suppressed = true;
            } else {
                let tcb = self.flows.get_mut(&key).unwrap();
                tcb.triggered = true;
                if profile.blocking_scope == BlockingScope::Flow {
                    self.blocked_until
                        .insert(key, now + profile.residual_block_seconds.max(0.0));
                }
                return self.enforce(&key, parsed, now, false);
            }
        }
        Decision::Forward
    }

    fn is_blackholed(&self, key: &FlowKey, now: f64) -> bool {
        self.profile.blocking_action == BlockingAction::Blackhole
            && self
                .blocked_until
                .get(key)
                .map(|until| now <= *until)
                .unwrap_or(false)
    }

    /// Apply the blocking action to the current packet.
    fn enforce(&mut self, key: &FlowKey, parsed: &ParsedPacket, _now: f64, _residual: bool) -> Decision {
        let in_path = self.profile.deployment == Deployment::InPath;
        match &self.profile.blocking_action {
            BlockingAction::Blackhole => {
                if in_path {
                    Decision::Drop
                } else {
                    Decision::Forward
                }
            }
            BlockingAction::InjectRst => {
                let (to_client, to_server) = self.craft_rsts(key, parsed);
                Decision::Inject { forward: true, to_client, to_server }
            }
            BlockingAction::InjectBlockpage(id) => {
                let page = self.craft_blockpage(key, parsed, &blockpage_body(id));
                let (_, to_server) = self.craft_rsts(key, parsed);
                Decision::Inject { forward: !in_path, to_client: vec![page], to_server }
            }
        }
    }

    fn flow_numbers(&self, key: &FlowKey, parsed: &ParsedPacket) -> (u32, u32) {
        // (server_seq, server_ack): best-effort numbers for injected packets.
        if let Some(tcb) = self.flows.get(key) {
            let sseq = tcb
                .server_isn
                .map(|i| i.wrapping_add(1))
                .unwrap_or(0x4000_0000);
            (sseq, tcb.rcv_next)
        } else {
            let t = parsed.tcp.as_ref().unwrap();
            (t.ack, parsed.seq_end())
        }
    }

    fn craft_rsts(&self, key: &FlowKey, parsed: &ParsedPacket) -> (Vec<Vec<u8>>, Vec<Vec<u8>>) {
        let (client_ip, client_port, server_ip, server_port) = *key;
        let (sseq, sack) = self.flow_numbers(key, parsed);

        let mut to_client_tcp = TcpHeader::new(server_port, client_port);
        to_client_tcp.seq = sseq;
        to_client_tcp.ack = sack;
        to_client_tcp.flags = TcpFlags(TcpFlags::RST | TcpFlags::ACK);
        let to_client =
            WirePacket::new(Ipv4Header::new(server_ip, client_ip), to_client_tcp, vec![]).serialize();

        let mut to_server_tcp = TcpHeader::new(client_port, server_port);
        to_server_tcp.seq = sack;
        to_server_tcp.ack = sseq;
        to_server_tcp.flags = TcpFlags(TcpFlags::RST);
        let to_server =
            WirePacket::new(Ipv4Header::new(client_ip, server_ip), to_server_tcp, vec![]).serialize();

        (vec![to_client], vec![to_server])
    }

    fn craft_blockpage(&self, key: &FlowKey, parsed: &ParsedPacket, body: &[u8]) -> Vec<u8> {
        let (client_ip, client_port, server_ip, server_port) = *key;
        let (sseq, sack) = self.flow_numbers(key, parsed);
        let mut payload = format!(
            "HTTP/1.1 403 Forbidden\r\nContent-Type: text/html\r\nContent-Length: {}\r\n\r\n",
            body.len()
        )
        .into_bytes();
        payload.extend_from_slice(body);
        let mut tcp = TcpHeader::new(server_port, client_port);
        tcp.seq = sseq;
        tcp.ack = sack;
        tcp.flags = TcpFlags(TcpFlags::PSH | TcpFlags::ACK | TcpFlags::FIN);
        WirePacket::new(Ipv4Header::new(server_ip, client_ip), tcp, payload).serialize()
    }
}

/// 32-bit timestamp comparison per RFC 1323 serial arithmetic.
fn ts_lt(a: u32, b: u32) -> bool {
    (a.wrapping_sub(b) as i32) < 0
}

/// Length of the complete-application-message prefix of the stream, if any:
/// whole TLS records, or everything up to the last HTTP header terminator.
fn complete_message_span(stream: &[u8]) -> Option<usize> {
    if stream.first() == Some(&0x16) {
        let mut i = 0usize;
        while i + 5 <= stream.len() {
            let len = u16::from_be_bytes([stream[i + 3], stream[i + 4]]) as usize;
            if i + 5 + len > stream.len() {
                break;
            }
            i += 5 + len;
        }
        return if i > 0 { Some(i) } else { None };
    }
    stream
        .windows(4)
        .rposition(|w| w == b"\r\n\r\n")
        .map(|p| p + 4)
}

fn contains_subslice(haystack: &[u8], needle: &[u8]) -> bool {
    if needle.is_empty() || haystack.len() < needle.len() {
        return false;
    }
    haystack.windows(needle.len()).any(|w| w == needle)
}

// ---------------------------------------------------------------------------
// Endhost

struct EndhostFlow {
    server_isn: u32,
    client_isn: u32,
    rcv_next: u32,
    snd_next: u32,
    established: bool,
    stream: ByteMap,
    processed: usize,
    fin_seen: bool,
}

pub struct EndhostState {
    pub profile: EndhostProfile,
    reassembler: IpReassembler,
    flows: HashMap<FlowKey, EndhostFlow>,
    seed: u64,
}

impl EndhostState {
    pub fn new(profile: EndhostProfile, seed: u64) -> Self {
        let reassembler = IpReassembler::new(
            profile.ip_overlap_policy,
            profile.frag_buffer_max,
            60.0,
            256,
        );
        EndhostState { profile, reassembler, flows: HashMap::new(), seed }
    }

    fn isn_for(&self, key: &FlowKey) -> u32 {
        let mut h: u64 = self.seed ^ 0x9e3779b97f4a7c15;
        for b in key.0.octets().iter().chain(key.2.octets().iter()) {
            h = h.wrapping_mul(0x100000001b3).wrapping_add(*b as u64);
        }
        h = h.wrapping_mul(0x100000001b3).wrapping_add(key.1 as u64);
        h = h.wrapping_mul(0x100000001b3).wrapping_add(key.3 as u64);
        ChaCha8Rng::seed_from_u64(h).next_u32()
    }

    /// Process one client packet; returns response packets.
    pub fn receive(&mut self, raw: &[u8], now: f64) -> Vec<Vec<u8>> {
        let parsed = match parse_packet(raw) {
            Ok(p) => p,
            Err(_) => return vec![],
        };
        let whole;
        let parsed = if parsed.is_fragment() {
            match self.reassembler.feed(&parsed, raw, now) {
                Some(w) => {
                    whole = w;
                    match parse_packet(&whole) {
                        Ok(p) => p,
                        Err(_) => return vec![],
                    }
                }
                None => return vec![],
            }
        } else {
            parsed
        };
        let tcp = match parsed.tcp.as_ref() {
            Some(t) => t,
            None => return vec![],
        };
        // Real stacks drop segments with bad checksums.
        if !tcp_checksum_ok_reassembled(&parsed) || parsed.has(ParseAnomaly::BadIpChecksum) {
            return vec![];
        }

        let key = flow_key(&parsed);
        let flags = tcp.flags;

        if flags.syn() && !flags.ack() {
            let server_isn = self.isn_for(&key);
            let flow = EndhostFlow {
                server_isn,
                client_isn: tcp.seq,
                rcv_next: tcp.seq.wrapping_add(1),
                snd_next: server_isn.wrapping_add(1),
                established: false,
                stream: ByteMap::default(),
                processed: 0,
                fin_seen: false,
            };
            let resp = self.synack(&key, &flow, tcp);
            self.flows.insert(key, flow);
            return vec![resp];
        }

        if flags.rst() {
            self.flows.remove(&key);
            return vec![];
        }

        if self.profile.strictness == Strictness::RfcStrict {
            // Nonsense flag combinations are discarded.
            let malformed = (flags.syn() && flags.fin()) || (flags.0 == 0);
            if malformed {
                if self.profile.reset_on_malformed {
                    if let Some(flow) = self.flows.get(&key) {
                        return vec![flag_reply(
                            &key,
                            flow,
                            self.profile.tcp_window,
                            TcpFlags::RST | TcpFlags::ACK,
                        )];
                    }
                }
                return vec![];
            }
        }

        let profile = self.profile.clone();
        let window = profile.tcp_window;
        let Some(flow) = self.flows.get_mut(&key) else {
            return vec![];
        };
        if flags.ack() {
            flow.established = true;
        }

        let mut out = Vec::new();
        if !parsed.payload.is_empty() {
            // Established-state sanity: data needs an ACK flag and no SYN.
            if !flags.ack() || flags.syn() {
                return vec![];
            }
            let base = flow.client_isn.wrapping_add(1);
            let off = rel_offset(tcp.seq, base);
            let rcv = rel_offset(flow.rcv_next, base);
            let upper = rcv + window as i64;
            let lo = off.max(rcv).max(0);
            let hi = (off + parsed.payload.len() as i64).min(upper);
            if off <= upper && hi > lo {
                let data = &parsed.payload[(lo - off) as usize..(hi - off) as usize];
                flow.stream.admit(lo, data, OverlapPolicy::FirstWins);
                // Only contiguous data advances rcv_next; out-of-order
                // segments are buffered and acknowledged once holes fill.
                let contiguous = flow.stream.contiguous().len() as i64;
                if contiguous > rcv {
                    flow.rcv_next = base.wrapping_add(contiguous as u32);
                }
            }
            // Respond to every newly completed application message.
            let assembled = flow.stream.contiguous();
            let responses = build_responses(&profile, &assembled, &mut flow.processed);
            for body in responses {
                let pkt = data_packet(&key, flow, &body);
                flow.snd_next = flow.snd_next.wrapping_add(body.len() as u32);
                out.push(pkt);
            }
            if !out.is_empty() {
                return out;
            }
            // Pure ACK for received data.
            out.push(flag_reply(&key, flow, window, TcpFlags::ACK));
            return out;
        }

        if flags.fin() && !flow.fin_seen {
            flow.fin_seen = true;
            flow.rcv_next = flow.rcv_next.wrapping_add(1);
            let finack = flag_reply(&key, flow, window, TcpFlags::FIN | TcpFlags::ACK);
            flow.snd_next = flow.snd_next.wrapping_add(1);
            return vec![finack];
        }
        vec![]
    }

    fn synack(&self, key: &FlowKey, flow: &EndhostFlow, client_syn: &TcpHeader) -> Vec<u8> {
        let (ip, mut tcp) = base_reply(key, flow, self.profile.tcp_window);
        tcp.seq = flow.server_isn;
        tcp.flags = TcpFlags(TcpFlags::SYN | TcpFlags::ACK);
        tcp.options = vec![crate::packet::TcpOption::new(2, vec![0x05, 0xb4])];
        // Echo a timestamp option when the client offered one.
        if client_syn.options.iter().any(|o| o.kind == 8) {
            tcp.options.push(crate::packet::TcpOption::nop());
            tcp.options.push(crate::packet::TcpOption::nop());
            tcp.options.push(crate::packet::TcpOption::new(
                8,
                [2000u32.to_be_bytes(), 1000u32.to_be_bytes()].concat(),
            ));
        }
        WirePacket::new(ip, tcp, vec![]).serialize()
    }

}

fn base_reply(key: &FlowKey, flow: &EndhostFlow, window: u16) -> (Ipv4Header, TcpHeader) {
    let (client_ip, client_port, server_ip, server_port) = *key;
    let ip = Ipv4Header::new(server_ip, client_ip);
    let mut tcp = TcpHeader::new(server_port, client_port);
    tcp.seq = flow.snd_next;
    tcp.ack = flow.rcv_next;
    tcp.window = window;
    (ip, tcp)
}

fn flag_reply(key: &FlowKey, flow: &EndhostFlow, window: u16, flags: u8) -> Vec<u8> {
    let (ip, mut tcp) = base_reply(key, flow, window);
    tcp.flags = TcpFlags(flags);
    WirePacket::new(ip, tcp, vec![]).serialize()
}

fn data_packet(key: &FlowKey, flow: &EndhostFlow, body: &[u8]) -> Vec<u8> {
    let (client_ip, client_port, server_ip, server_port) = *key;
    let ip = Ipv4Header::new(server_ip, client_ip);
    let mut tcp = TcpHeader::new(server_port, client_port);
    tcp.seq = flow.snd_next;
    tcp.ack = flow.rcv_next;
    tcp.flags = TcpFlags(TcpFlags::PSH | TcpFlags::ACK);
    WirePacket::new(ip, tcp, body.to_vec()).serialize()
}

fn tcp_checksum_ok_reassembled(parsed: &ParsedPacket) -> bool {
    // After IP reassembly the original segment bytes are not retained, so
    // checksum validity is derived from parse-time annotation.
    !parsed.has(ParseAnomaly::BadTcpChecksum)
}

/// Scan the assembled stream for complete application messages past
/// `processed`, returning one response body per message.
fn build_responses(profile: &EndhostProfile, assembled: &[u8], processed: &mut usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    match profile.responder {
        Responder::HttpEcho => {
            while let Some(pos) = find_subslice(&assembled[*processed..], b"\r\n\r\n") {
                let chunk = &assembled[*processed..*processed + pos + 4];
                *processed += pos + 4;
                if profile.strictness == Strictness::RfcStrict && !http_request_is_valid(chunk) {
                    continue;
                }
                let host = parse_host(chunk).unwrap_or_else(|| "unknown".into());
                let body = format!("<html><body>served for {host}</body></html>");
                out.push(
                    format!(
                        "HTTP/1.1 200 OK\r\nContent-Type: text/html\r\nContent-Length: {}\r\n\r\n{}",
                        body.len(),
                        body
                    )
                    .into_bytes(),
                );
            }
        }
        Responder::TlsHelloResponder => {
            // Accumulate handshake bytes from complete records.
            let mut handshake = Vec::new();
            let mut i = 0usize;
            while i + 5 <= assembled.len() {
                let len = u16::from_be_bytes([assembled[i + 3], assembled[i + 4]]) as usize;
                if i + 5 + len > assembled.len() {
                    break;
                }
                if assembled[i] == 0x16 {
                    handshake.extend_from_slice(&assembled[i + 5..i + 5 + len]);
                }
                i += 5 + len;
            }
            if handshake.len() >= 4 && handshake[0] == 0x01 {
                let msg_len =
                    u32::from_be_bytes([0, handshake[1], handshake[2], handshake[3]]) as usize;
                if handshake.len() >= 4 + msg_len && *processed == 0 {
                    *processed = i;
                    // Minimal ServerHello record; contents are opaque bytes.
                    let body: Vec<u8> = {
                        let hello = [
                            0x02u8, 0x00, 0x00, 0x26, 0x03, 0x03,
                        ]
                        .iter()
                        .copied()
                        .chain([0x5a; 32])
                        .chain([0x00, 0x13, 0x01, 0x00])
                        .collect::<Vec<u8>>();
                        let mut rec = vec![0x16, 0x03, 0x03];
                        rec.extend_from_slice(&(hello.len() as u16).to_be_bytes());
                        rec.extend_from_slice(&hello);
                        rec
                    };
                    out.push(body);
                }
            }
        }
    }
    out
}

fn http_request_is_valid(chunk: &[u8]) -> bool {
    let line_end = find_subslice(chunk, b"\r\n").unwrap_or(chunk.len());
    let line = &chunk[..line_end];
    let text = String::from_utf8_lossy(line);
    let mut parts = text.split(' ');
    let method = parts.next().unwrap_or("");
    let _uri = parts.next().unwrap_or("");
    let version = parts.next().unwrap_or("");
    matches!(method, "GET" | "POST" | "HEAD" | "PUT" | "DELETE" | "OPTIONS")
        && version.starts_with("HTTP/1.")
}

fn parse_host(chunk: &[u8]) -> Option<String> {
    let text = String::from_utf8_lossy(chunk);
    for line in text.split("\r\n") {
        if let Some(rest) = line.strip_prefix("Host:") {
            return Some(rest.trim().to_string());
        }
    }
    None
}

pub fn find_subslice(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    if needle.is_empty() || haystack.len() < needle.len() {
        return None;
    }
    haystack.windows(needle.len()).position(|w| w == needle)
}

// ---------------------------------------------------------------------------
// The simulated path

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Origin {
    Client,
    Endhost,
    Dpi(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub time: f64,
    pub origin: Origin,
    pub inbound: bool,
    pub bytes: Vec<u8>,
}

/// Virtual time; advances only via explicit steps.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimClock {
    pub now: f64,
}

impl SimClock {
    pub fn advance(&mut self, dt: f64) {
        self.now += dt.max(0.0);
    }
}

/// One client link through an ordered DPI chain to an endhost.
pub struct SimNetwork {
    pub clock: SimClock,
    dpis: Vec<DpiState>,
    endhost: EndhostState,
    to_client: Vec<(f64, Vec<u8>)>,
    pub trace: Vec<TraceEntry>,
}

impl SimNetwork {
    pub fn new(profiles: Vec<DpiProfile>, endhost: EndhostProfile, seed: u64) -> Self {
        SimNetwork {
            clock: SimClock::default(),
            dpis: profiles.into_iter().map(|p| DpiState::new(p, seed)).collect(),
            endhost: EndhostState::new(endhost, seed),
            to_client: Vec::new(),
            trace: Vec::new(),
        }
    }

    /// Send one client packet down the path at the current virtual time.
    pub fn client_send(&mut self, bytes: &[u8]) {
        let now = self.clock.now;
        self.trace.push(TraceEntry { time: now, origin: Origin::Client, inbound: false, bytes: bytes.to_vec() });
        self.forward_c2s(bytes.to_vec(), 0, now);
    }

    fn forward_c2s(&mut self, bytes: Vec<u8>, from_dpi: usize, now: f64) {
        let mut current = Some(bytes);
        for i in from_dpi..self.dpis.len() {
            let Some(bytes) = current.take() else { return };
            let in_path = self.dpis[i].profile.deployment == Deployment::InPath;
            match self.dpis[i].process(&bytes, Direction::ClientToServer, now) {
                Decision::Forward => current = Some(bytes),
                Decision::Drop => {
                    if in_path {
                        return;
                    }
                    current = Some(bytes);
                }
                Decision::Inject { forward, to_client, to_server } => {
                    for pkt in to_client {
                        self.trace.push(TraceEntry {
                            time: now,
                            origin: Origin::Dpi(i),
                            inbound: true,
                            bytes: pkt.clone(),
                        });
                        self.to_client.push((now, pkt));
                    }
                    for pkt in to_server {
                        self.trace.push(TraceEntry {
                            time: now,
                            origin: Origin::Dpi(i),
                            inbound: false,
                            bytes: pkt.clone(),
                        });
                        let responses = self.endhost.receive(&pkt, now);
                        for r in responses {
                            self.deliver_s2c(r, now);
                        }
                    }
                    if forward || !in_path {
                        current = Some(bytes);
                    } else {
                        return;
                    }
                }
            }
        }
        if let Some(bytes) = current {
            let responses = self.endhost.receive(&bytes, now);
            for r in responses {
                self.trace.push(TraceEntry {
                    time: now,
                    origin: Origin::Endhost,
                    inbound: true,
                    bytes: r.clone(),
                });
                self.deliver_s2c(r, now);
            }
        }
    }

    fn deliver_s2c(&mut self, bytes: Vec<u8>, now: f64) {
        let mut current = Some(bytes);
        for i in (0..self.dpis.len()).rev() {
            let Some(bytes) = current.take() else { return };
            let in_path = self.dpis[i].profile.deployment == Deployment::InPath;
            match self.dpis[i].process(&bytes, Direction::ServerToClient, now) {
                Decision::Forward => current = Some(bytes),
                Decision::Drop => {
                    if in_path {
                        return;
                    }
                    current = Some(bytes);
                }
                Decision::Inject { forward, to_client, .. } => {
                    for pkt in to_client {
                        self.to_client.push((now, pkt));
                    }
                    if forward || !in_path {
                        current = Some(bytes);
                    } else {
                        return;
                    }
                }
            }
        }
        if let Some(bytes) = current {
            self.to_client.push((now, bytes));
        }
    }

    /// Packets currently deliverable to the client; drains the queue.
    pub fn client_recv(&mut self) -> Vec<Vec<u8>> {
        let now = self.clock.now;
        let (ready, later): (Vec<_>, Vec<_>) =
            self.to_client.drain(..).partition(|(t, _)| *t <= now);
        self.to_client = later;
        ready.into_iter().map(|(_, b)| b).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zoo_profiles_are_distinct_and_valid() {
        let zoo = zoo_default();
        assert!(zoo.len() >= 10);
        let mut ids: Vec<&str> = zoo.iter().map(|p| p.id.as_str()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), zoo.len());
        for p in &zoo {
            p.validate().unwrap();
        }
        // Noiseless in-path profiles differ pairwise on at least two axes.
        let noiseless: Vec<_> = zoo
            .iter()
            .filter(|p| p.fail_open_probability == 0.0 && p.deployment == Deployment::InPath)
            .collect();
        assert!(noiseless.len() >= 8);
        for (i, a) in noiseless.iter().enumerate() {
            for b in noiseless.iter().skip(i + 1) {
                assert!(axis_differences(a, b) >= 2, "{} vs {}", a.id, b.id);
            }
        }
    }

    fn axis_differences(a: &DpiProfile, b: &DpiProfile) -> usize {
        let mut n = 0;
        n += (a.seq_validation != b.seq_validation) as usize;
        n += (a.paws != b.paws) as usize;
        n += (a.checksum_validation != b.checksum_validation) as usize;
        n += (a.ip_overlap_policy != b.ip_overlap_policy) as usize;
        n += (a.tcp_overlap_policy != b.tcp_overlap_policy) as usize;
        n += (a.frag_buffer_max != b.frag_buffer_max) as usize;
        n += (a.max_frag_disorder != b.max_frag_disorder) as usize;
        n += (a.tcb_creation != b.tcb_creation) as usize;
        n += (a.tcb_teardown_on_rst != b.tcb_teardown_on_rst) as usize;
        n += (a.urgent_handling != b.urgent_handling) as usize;
        n += (a.blocking_action != b.blocking_action) as usize;
        n += (a.residual_block_seconds != b.residual_block_seconds) as usize;
        n
    }

    #[test]
    fn onpath_blackhole_rejected() {
        let mut p = base_profile("bad");
        p.deployment = Deployment::OnPath;
        p.blocking_action = BlockingAction::Blackhole;
        assert!(p.validate().is_err());
    }

    #[test]
    fn zoo_roundtrips_through_yaml() {
        let zoo = zoo_default();
        let text = serde_yaml::to_string(&zoo).unwrap();
        let back: Vec<DpiProfile> = serde_yaml::from_str(&text).unwrap();
        assert_eq!(zoo, back);
    }
}
