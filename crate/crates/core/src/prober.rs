//! Execution engine: runs instantiated probes over a transport, tracking
//! live SEQ/ACK state, and schedules Control/Test campaigns.

use std::io::Write;
use std::net::Ipv4Addr;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::appmsg::DomainRole;
use crate::netsim::{DpiProfile, EndhostProfile, SimNetwork};
use crate::packet::{
    parse_packet, Ipv4Header, Override, SeqContext, TcpHeader, WirePacket,
};
use crate::probe::{
    Anchor, ExecutablePlan, FragLayer, FragOrder, FragPart, FragmentSpec, PlanStep, ProbeConfig,
    Protocol, ResponsePredicate,
};

pub const SIM_CLIENT_ADDR: Ipv4Addr = Ipv4Addr::new(10, 0, 0, 2);
pub const SIM_WAIT_TIMEOUT: f64 = 0.1;
pub const RAW_WAIT_TIMEOUT: f64 = 5.0;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("raw sockets require elevated privileges: {0}")]
    PrivilegeRequired(String),
    #[error("transport io error: {0}")]
    Io(String),
}

// ---------------------------------------------------------------------------
// Targets

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TargetDomains {
    pub control: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TargetMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub netblock: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asn: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub country: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TargetSpec {
    pub address: Ipv4Addr,
    pub port: u16,
    pub protocol: Protocol,
    pub domains: TargetDomains,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<TargetMetadata>,
}

impl TargetSpec {
    pub fn label(&self) -> String {
        format!("{}:{}/{}", self.address, self.port, self.protocol.as_str())
    }
}

// ---------------------------------------------------------------------------
// Records

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PacketDirection {
    Out,
    In,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketEvent {
    pub direction: PacketDirection,
    pub timestamp: f64,
    /// Raw IPv4 packet, hex-encoded.
    pub data: String,
}

impl PacketEvent {
    pub fn bytes(&self) -> Vec<u8> {
        hex::decode(&self.data).unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum TransportKind {
    Sim { seed: u64 },
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum RecordStatus {
    Completed,
    HandshakeFailed,
    TransportError(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FlowTuple {
    pub src_ip: Ipv4Addr,
    pub src_port: u16,
    pub dst_ip: Ipv4Addr,
    pub dst_port: u16,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MeasurementRecord {
    pub target: String,
    pub probe_id: String,
    pub role: DomainRole,
    pub repetition: u32,
    pub transport: TransportKind,
    pub flow: FlowTuple,
    pub client_isn: u32,
    pub packets: Vec<PacketEvent>,
    pub status: RecordStatus,
}

pub fn write_jsonl<W: Write>(records: &[MeasurementRecord], mut w: W) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl(text: &str) -> Result<Vec<MeasurementRecord>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

// ---------------------------------------------------------------------------
// Transports

pub trait Transport {
    fn send(&mut self, bytes: &[u8]) -> Result<(), TransportError>;
    /// Packets available right now; non-blocking.
    fn recv(&mut self) -> Vec<Vec<u8>>;
    fn sleep(&mut self, seconds: f64);
    fn now(&self) -> f64;
    fn wait_timeout(&self) -> f64;
    fn kind(&self) -> TransportKind;
    fn local_addr(&self) -> Ipv4Addr;
}

/// In-process transport over a [`SimNetwork`].
pub struct SimTransport {
    pub net: SimNetwork,
    seed: u64,
}

impl SimTransport {
    pub fn new(profiles: Vec<DpiProfile>, endhost: EndhostProfile, seed: u64) -> Self {
        SimTransport { net: SimNetwork::new(profiles, endhost, seed), seed }
    }
}

impl Transport for SimTransport {
    fn send(&mut self, bytes: &[u8]) -> Result<(), TransportError> {
        self.net.client_send(bytes);
        Ok(())
    }

    fn recv(&mut self) -> Vec<Vec<u8>> {
        self.net.client_recv()
    }

    fn sleep(&mut self, seconds: f64) {
        self.net.clock.advance(seconds);
    }

    fn now(&self) -> f64 {
        self.net.clock.now
    }

    fn wait_timeout(&self) -> f64 {
        SIM_WAIT_TIMEOUT
    }

    fn kind(&self) -> TransportKind {
        TransportKind::Sim { seed: self.seed }
    }

    fn local_addr(&self) -> Ipv4Addr {
        SIM_CLIENT_ADDR
    }
}

/// Raw-socket transport (IP_HDRINCL). Requires CAP_NET_RAW; excluded from the
/// default test suite. The operator is responsible for suppressing local
/// kernel RSTs and disabling kernel reassembly on the vantage point; see the
/// preflight command.
pub struct RawTransport {
    fd: i32,
    dst: Ipv4Addr,
    local: Ipv4Addr,
    start: Instant,
}

impl RawTransport {
    pub fn open(dst: Ipv4Addr, local: Ipv4Addr) -> Result<Self, TransportError> {
        let fd = unsafe { libc::socket(libc::AF_INET, libc::SOCK_RAW, libc::IPPROTO_TCP) };
        if fd < 0 {
            let err = std::io::Error::last_os_error();
            return Err(if err.raw_os_error() == Some(libc::EPERM) {
                TransportError::PrivilegeRequired(err.to_string())
            } else {
                TransportError::Io(err.to_string())
            });
        }
        let one: libc::c_int = 1;
        let rc = unsafe {
            libc::setsockopt(
                fd,
                libc::IPPROTO_IP,
                libc::IP_HDRINCL,
                &one as *const _ as *const libc::c_void,
                std::mem::size_of::<libc::c_int>() as libc::socklen_t,
            )
        };
        if rc != 0 {
            let err = std::io::Error::last_os_error();
            unsafe { libc::close(fd) };
            return Err(TransportError::Io(err.to_string()));
        }
        Ok(RawTransport { fd, dst, local, start: Instant::now() })
    }
}

impl Drop for RawTransport {
    fn drop(&mut self) {
        unsafe { libc::close(self.fd) };
    }
}

impl Transport for RawTransport {
    fn send(&mut self, bytes: &[u8]) -> Result<(), TransportError> {
        let addr = libc::sockaddr_in {
            sin_family: libc::AF_INET as libc::sa_family_t,
            sin_port: 0,
            sin_addr: libc::in_addr { s_addr: u32::from(self.dst).to_be() },
            sin_zero: [0; 8],
        };
        let rc = unsafe {
            libc::sendto(
                self.fd,
                bytes.as_ptr() as *const libc::c_void,
                bytes.len(),
                0,
                &addr as *const _ as *const libc::sockaddr,
                std::mem::size_of::<libc::sockaddr_in>() as libc::socklen_t,
            )
        };
        if rc < 0 {
            return Err(TransportError::Io(std::io::Error::last_os_error().to_string()));
        }
        Ok(())
    }

    fn recv(&mut self) -> Vec<Vec<u8>> {
        let mut out = Vec::new();
        loop {
            let mut pfd = libc::pollfd { fd: self.fd, events: libc::POLLIN, revents: 0 };
            let n = unsafe { libc::poll(&mut pfd, 1, 10) };
            if n <= 0 {
                break;
            }
            let mut buf = vec![0u8; 65535];
            let rc = unsafe {
                libc::recv(self.fd, buf.as_mut_ptr() as *mut libc::c_void, buf.len(), 0)
            };
            if rc <= 0 {
                break;
            }
            buf.truncate(rc as usize);
            if let Ok(p) = parse_packet(&buf) {
                if p.ip.src == self.dst {
                    out.push(buf);
                }
            }
        }
        out
    }

    fn sleep(&mut self, seconds: f64) {
        std::thread::sleep(std::time::Duration::from_secs_f64(seconds));
    }

    fn now(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    fn wait_timeout(&self) -> f64 {
        RAW_WAIT_TIMEOUT
    }

    fn kind(&self) -> TransportKind {
        TransportKind::Raw
    }

    fn local_addr(&self) -> Ipv4Addr {
        self.local
    }
}

/// Environmental self-checks for raw-socket measurement. Returns human
/// readable findings; an empty list means ready.
pub fn raw_preflight() -> Vec<String> {
    let mut findings = Vec::new();
    match RawTransport::open(Ipv4Addr::new(127, 0, 0, 1), Ipv4Addr::new(127, 0, 0, 1)) {
        Ok(_) => {}
        Err(e) => findings.push(format!("cannot open raw socket: {e}")),
    }
    findings.push(
        "verify the local stack does not send RSTs for this flow \
         (e.g. an iptables OUTPUT rule dropping RST for the probe ports)"
            .into(),
    );
    findings.push("verify no local middlebox or NAT reassembles IP fragments in path".into());
    findings
}

// ---------------------------------------------------------------------------
// Probe execution

fn predicate_matches(pred: ResponsePredicate, bytes: &[u8]) -> bool {
    let Ok(p) = parse_packet(bytes) else { return false };
    let Some(tcp) = p.tcp.as_ref() else { return false };
    match pred {
        ResponsePredicate::Any => true,
        ResponsePredicate::Synack => tcp.flags.syn() && tcp.flags.ack(),
        ResponsePredicate::Ack => tcp.flags.ack(),
        ResponsePredicate::Response => !p.payload.is_empty(),
    }
}

fn note_inbound(ctx: &mut SeqContext, bytes: &[u8]) {
    let Ok(p) = parse_packet(bytes) else { return };
    let Some(tcp) = p.tcp.as_ref() else { return };
    if tcp.flags.syn() && tcp.flags.ack() {
        ctx.server_isn = Some(tcp.seq);
        ctx.next_ack = tcp.seq.wrapping_add(1);
        return;
    }
    let end = p.seq_end();
    if (end.wrapping_sub(ctx.next_ack) as i32) > 0 {
        ctx.next_ack = end;
    }
}

/// Execute one instantiated plan over a transport. SEQ/ACK state is resolved
/// live: the SYN-ACK supplies the server ISN, inbound data advances the
/// expected ACK, and each sent step advances NextExpected unless flagged.
pub fn execute_probe(
    plan: &ExecutablePlan,
    transport: &mut dyn Transport,
    src_port: u16,
    client_isn: u32,
) -> MeasurementRecord {
    let src_ip = transport.local_addr();
    let flow = FlowTuple { src_ip, src_port, dst_ip: plan.dst, dst_port: plan.dst_port };
    let mut record = MeasurementRecord {
        target: format!("{}:{}/{}", plan.dst, plan.dst_port, plan.protocol.as_str()),
        probe_id: plan.probe_id.clone(),
        role: plan.role,
        repetition: 0,
        transport: transport.kind(),
        flow,
        client_isn,
        packets: Vec::new(),
        status: RecordStatus::Completed,
    };

    let mut ctx = SeqContext {
        client_isn: Some(client_isn),
        server_isn: None,
        next_seq: client_isn,
        next_ack: 0,
    };
    let mut ipid: u16 = 7000;

    for step in &plan.steps {
        let seq = match step.seq.resolve(ctx.client_isn, ctx.server_isn, ctx.next_seq) {
            Ok(v) => v,
            Err(e) => {
                record.status = RecordStatus::TransportError(e.to_string());
                return record;
            }
        };
        let ack = match step.ack.resolve(ctx.client_isn, ctx.server_isn, ctx.next_ack) {
            Ok(v) => v,
            Err(e) => {
                record.status = RecordStatus::TransportError(e.to_string());
                return record;
            }
        };

        let emissions = emit_step(step, seq, ack, src_ip, src_port, flow, &mut ipid);
        for (delay, bytes) in emissions {
            if delay > 0.0 {
                transport.sleep(delay);
            }
            record.packets.push(PacketEvent {
                direction: PacketDirection::Out,
                timestamp: transport.now(),
                data: hex::encode(&bytes),
            });
            if let Err(e) = transport.send(&bytes) {
                record.status = RecordStatus::TransportError(e.to_string());
                return record;
            }
        }

        if step.advances_seq {
            let mut end = seq.wrapping_add(step.payload.len() as u32);
            if step.flags.syn() {
                end = end.wrapping_add(1);
            }
            if step.flags.fin() {
                end = end.wrapping_add(1);
            }
            if (end.wrapping_sub(ctx.next_seq) as i32) > 0 {
                ctx.next_seq = end;
            }
        }

        // Drain whatever already arrived, then honor the wait (with timeout).
        // A SYN-ACK drained by an earlier step already satisfies a later
        // synack wait; inserted pre-handshake steps rely on this.
        let wait = step.wait_for;
        let effective = match wait {
            Some(ResponsePredicate::Synack) if ctx.server_isn.is_some() => None,
            w => w,
        };
        wait_for(transport, &mut record, &mut ctx, effective);
        if wait == Some(ResponsePredicate::Synack) && ctx.server_isn.is_none() {
            record.status = RecordStatus::HandshakeFailed;
            return record;
        }

        if step.delay_after > 0.0 {
            transport.sleep(step.delay_after);
        }
    }

    // Final drain so late responses (or their absence) are on the record.
    transport.sleep(transport.wait_timeout());
    for bytes in transport.recv() {
        note_inbound(&mut ctx, &bytes);
        record.packets.push(PacketEvent {
            direction: PacketDirection::In,
            timestamp: transport.now(),
            data: hex::encode(&bytes),
        });
    }
    record
}

fn wait_for(
    transport: &mut dyn Transport,
    record: &mut MeasurementRecord,
    ctx: &mut SeqContext,
    pred: Option<ResponsePredicate>,
) {
    let start = transport.now();
    let timeout = transport.wait_timeout();
    let mut satisfied = pred.is_none();
    loop {
        for bytes in transport.recv() {
            note_inbound(ctx, &bytes);
            record.packets.push(PacketEvent {
                direction: PacketDirection::In,
                timestamp: transport.now(),
                data: hex::encode(&bytes),
            });
            if let Some(p) = pred {
                if predicate_matches(p, &bytes) {
                    satisfied = true;
                }
            }
        }
        if satisfied || pred.is_none() {
            return;
        }
        if transport.now() - start >= timeout {
            return;
        }
        transport.sleep(timeout / 2.0 + 1e-9);
    }
}

// ---------------------------------------------------------------------------
// Step emission (single packet, IP fragmentation, TCP segmentation)

fn base_packet(
    step: &PlanStep,
    seq: u32,
    ack: u32,
    src_ip: Ipv4Addr,
    src_port: u16,
    flow: FlowTuple,
    reversed: bool,
) -> WirePacket {
    let mut ip = step.ip.clone();
    ip.src = src_ip;
    let mut tcp = TcpHeader::new(src_port, flow.dst_port);
    tcp.seq = seq;
    tcp.ack = ack;
    tcp.data_offset = step.data_offset;
    tcp.flags = step.flags;
    tcp.window = step.window;
    tcp.checksum = step.checksum;
    tcp.urgent_pointer = step.urgent_pointer;
    tcp.options = step.options.clone();
    let payload = if reversed {
        step.payload_reversed.clone().unwrap_or_else(|| step.payload.clone())
    } else {
        step.payload.clone()
    };
    WirePacket::new(ip, tcp, payload)
}

fn resolve_anchor(anchor: Anchor, offset: i64, total: usize, span: Option<(usize, usize)>) -> i64 {
    let base = match anchor {
        Anchor::Begin => 0i64,
        Anchor::End => total as i64,
        Anchor::DomainStart => span.map(|(o, _)| o as i64).unwrap_or(0),
        Anchor::DomainEnd => span.map(|(o, l)| (o + l) as i64).unwrap_or(total as i64),
    };
    (base + offset).clamp(0, total as i64)
}

/// Serialize an IPv4 header for `ip` followed by `body`, fixing length,
/// fragment fields, and header checksum.
fn raw_ip_packet(ip: &Ipv4Header, frag_units: u16, more: bool, body: &[u8]) -> Vec<u8> {
    let mut hdr_ip = ip.clone();
    hdr_ip.fragment_offset = frag_units;
    hdr_ip.more_fragments = more;
    hdr_ip.dont_fragment = false;
    hdr_ip.total_length = Override::Auto;
    hdr_ip.checksum = Override::Auto;
    let tmpl = WirePacket::new(hdr_ip.clone(), TcpHeader::new(0, 0), vec![]).serialize();
    let hlen = hdr_ip.header_len().min(tmpl.len());
    let mut out = tmpl[..hlen].to_vec();
    out.extend_from_slice(body);
    let tl = (hlen + body.len()) as u16;
    out[2..4].copy_from_slice(&tl.to_be_bytes());
    out[10..12].copy_from_slice(&[0, 0]);
    let ck = crate::packet::ones_complement_checksum(&out[..hlen], &[]);
    out[10..12].copy_from_slice(&ck.to_be_bytes());
    out
}

/// Expand one plan step into wire packets with per-packet send delays.
fn emit_step(
    step: &PlanStep,
    seq: u32,
    ack: u32,
    src_ip: Ipv4Addr,
    src_port: u16,
    flow: FlowTuple,
    ipid: &mut u16,
) -> Vec<(f64, Vec<u8>)> {
    let mut ip_id = step.ip.identification;
    if ip_id == 0 {
        *ipid = ipid.wrapping_add(1);
        ip_id = *ipid;
    }
    let mut step_ip = step.ip.clone();
    step_ip.identification = ip_id;
    let step = &PlanStep { ip: step_ip, ..step.clone() };

    let Some(frag) = &step.fragment else {
        let pkt = base_packet(step, seq, ack, src_ip, src_port, flow, false);
        return vec![(0.0, pkt.serialize())];
    };

    match frag.layer {
        FragLayer::Ip => emit_ip_fragments(step, frag, seq, ack, src_ip, src_port, flow, ipid),
        FragLayer::Tcp => emit_tcp_segments(step, frag, seq, ack, src_ip, src_port, flow),
    }
}

fn emit_ip_fragments(
    step: &PlanStep,
    frag: &FragmentSpec,
    seq: u32,
    ack: u32,
    src_ip: Ipv4Addr,
    src_port: u16,
    flow: FlowTuple,
    ipid: &mut u16,
) -> Vec<(f64, Vec<u8>)> {
    let whole = base_packet(step, seq, ack, src_ip, src_port, flow, false).serialize();
    let whole_rev = base_packet(step, seq, ack, src_ip, src_port, flow, true).serialize();
    let hlen = step.ip.header_len().min(whole.len());
    let seg = &whole[hlen..];
    let seg_rev = &whole_rev[hlen..];
    let tcp_hlen = if seg.len() >= 13 { ((seg[12] >> 4) as usize) * 4 } else { 20 };
    // Domain span relative to the IP payload.
    let span = step.domain_span.map(|(o, l)| (o + tcp_hlen, l));

    let parts: Vec<FragPart> = match &frag.parts {
        Some(p) => p.clone(),
        None => {
            if let Some(s) = frag.first_size {
                let s = (s.max(8) / 8 * 8).min(seg.len());
                vec![
                    FragPart::range(Anchor::Begin, 0, Anchor::Begin, s as i64),
                    FragPart::range(Anchor::Begin, s as i64, Anchor::End, 0),
                ]
            } else {
                let count = frag.count.unwrap_or(2).max(1);
                let size = (seg.len().div_ceil(count)).div_ceil(8).max(1) * 8;
                let mut parts = Vec::new();
                let mut a = 0usize;
                while a < seg.len() {
                    let b = (a + size).min(seg.len());
                    parts.push(FragPart::range(Anchor::Begin, a as i64, Anchor::Begin, b as i64));
                    a = b;
                }
                parts
            }
        }
    };

    let mut out = Vec::new();
    for part in &parts {
        if let Some(d) = &part.dummy {
            let mut rng = ChaCha8Rng::seed_from_u64(d.seed);
            for _ in 0..d.count {
                let mut body = vec![0u8; d.length.max(8) / 8 * 8];
                rng.fill_bytes(&mut body);
                *ipid = ipid.wrapping_add(1);
                let mut dip = step.ip.clone();
                dip.src = src_ip;
                dip.identification = (rng.next_u32() & 0xffff) as u16 | 1;
                out.push((part.delay, raw_ip_packet(&dip, 0, true, &body)));
            }
            continue;
        }
        let mut a = resolve_anchor(part.start_anchor, part.start, seg.len(), span) as usize;
        let mut b = resolve_anchor(part.end_anchor, part.end, seg.len(), span) as usize;
        if b <= a {
            continue;
        }
        // IP fragment boundaries live on 8-byte units: widen outward.
        a -= a % 8;
        if b < seg.len() {
            b = (b.div_ceil(8) * 8).min(seg.len());
        }
        let source = if part.reversed { seg_rev } else { seg };
        let more = b < seg.len();
        let mut pkt_ip = step.ip.clone();
        pkt_ip.src = src_ip;
        out.push((part.delay, raw_ip_packet(&pkt_ip, (a / 8) as u16, more, &source[a..b])));
    }

    finish_order(out, frag)
}

fn emit_tcp_segments(
    step: &PlanStep,
    frag: &FragmentSpec,
    seq: u32,
    ack: u32,
    src_ip: Ipv4Addr,
    src_port: u16,
    flow: FlowTuple,
) -> Vec<(f64, Vec<u8>)> {
    let total = step.payload.len();
    let span = step.domain_span;
    let parts: Vec<FragPart> = match &frag.parts {
        Some(p) => p.clone(),
        None => {
            if let Some(s) = frag.first_size {
                let s = s.max(1).min(total);
                vec![
                    FragPart::range(Anchor::Begin, 0, Anchor::Begin, s as i64),
                    FragPart::range(Anchor::Begin, s as i64, Anchor::End, 0),
                ]
            } else {
                let count = frag.count.unwrap_or(2).max(1);
                let size = total.div_ceil(count).max(1);
                let mut parts = Vec::new();
                let mut a = 0usize;
                while a < total {
                    let b = (a + size).min(total);
                    parts.push(FragPart::range(Anchor::Begin, a as i64, Anchor::Begin, b as i64));
                    a = b;
                }
                parts
            }
        }
    };

    let rev = step.payload_reversed.clone().unwrap_or_else(|| step.payload.clone());
    let mut out = Vec::new();
    for part in &parts {
        let a = resolve_anchor(part.start_anchor, part.start, total, span) as usize;
        let b = resolve_anchor(part.end_anchor, part.end, total, span) as usize;
        if b <= a {
            continue;
        }
        let source: &[u8] = if part.reversed { &rev } else { &step.payload };
        let mut sub = step.clone();
        sub.payload = source[a..b].to_vec();
        sub.payload_reversed = None;
        sub.fragment = None;
        let pkt = base_packet(&sub, seq.wrapping_add(a as u32), ack, src_ip, src_port, flow, false);
        out.push((part.delay, pkt.serialize()));
    }
    finish_order(out, frag)
}

fn finish_order(mut out: Vec<(f64, Vec<u8>)>, frag: &FragmentSpec) -> Vec<(f64, Vec<u8>)> {
    if frag.order == FragOrder::Reversed {
        out.reverse();
    }
    if frag.inter_delay > 0.0 {
        for (i, (d, _)) in out.iter_mut().enumerate() {
            if i > 0 && *d == 0.0 {
                *d = frag.inter_delay;
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Campaigns

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CampaignPlan {
    pub targets: Vec<TargetSpec>,
    #[serde(skip)]
    pub probes: Vec<ProbeConfig>,
    pub repetitions: u32,
    pub inter_probe_delay: f64,
    pub seed: u64,
}

impl CampaignPlan {
    pub fn new(targets: Vec<TargetSpec>, probes: Vec<ProbeConfig>, seed: u64) -> Self {
        CampaignPlan { targets, probes, repetitions: 3, inter_probe_delay: 0.0, seed }
    }

    pub fn validate(&self) -> Result<(), String> {
        let mut keys: Vec<_> =
            self.targets.iter().map(|t| (t.address, t.port, t.protocol)).collect();
        keys.sort();
        let n = keys.len();
        keys.dedup();
        if keys.len() != n {
            return Err("duplicate (address, port, protocol) in target list".into());
        }
        Ok(())
    }
}

pub trait TransportFactory {
    /// One transport per target; reused for that target's whole sequence.
    fn create(&mut self, target: &TargetSpec) -> Result<Box<dyn Transport>, TransportError>;
}

/// Builds a fresh simulated path per target, all sharing one middlebox
/// profile chain definition and base seed.
pub struct SimFactory {
    pub profiles: Vec<DpiProfile>,
    pub seed: u64,
}

impl TransportFactory for SimFactory {
    fn create(&mut self, target: &TargetSpec) -> Result<Box<dyn Transport>, TransportError> {
        Ok(Box::new(SimTransport::new(
            self.profiles.clone(),
            EndhostProfile::for_protocol(target.protocol),
            self.seed,
        )))
    }
}

/// Run the full campaign: per target, probes strictly sequential, Control
/// before Test within each (probe, repetition), four-tuples never reused.
pub fn run_campaign(
    plan: &CampaignPlan,
    factory: &mut dyn TransportFactory,
) -> Vec<MeasurementRecord> {
    let mut records = Vec::new();
    // Source ports partitioned per target so per-target schedules stay
    // deterministic while tuples remain campaign-unique.
    for (ti, target) in plan.targets.iter().enumerate() {
        let mut port: u16 = 40000u16.wrapping_add((ti as u16).wrapping_mul(2000));
        let mut transport = match factory.create(target) {
            Ok(t) => t,
            Err(e) => {
                records.push(error_record(target, &e));
                continue;
            }
        };
        let mut isn_rng = ChaCha8Rng::seed_from_u64(plan.seed ^ (ti as u64) << 32);
        for probe in &plan.probes {
            for rep in 0..plan.repetitions {
                for role in [DomainRole::Control, DomainRole::Test] {
                    if role == DomainRole::Test && target.domains.test.is_none() {
                        continue;
                    }
                    let plan_e = match probe.instantiate(target, role) {
                        Ok(p) => p,
                        Err(e) => {
                            let mut r = error_record(target, &e);
                            r.probe_id = probe.id().to_string();
                            r.role = role;
                            r.repetition = rep;
                            records.push(r);
                            continue;
                        }
                    };
                    port = port.wrapping_add(1);
                    let isn = isn_rng.next_u32();
                    let mut record = execute_probe(&plan_e, transport.as_mut(), port, isn);
                    record.repetition = rep;
                    records.push(record);
                    transport.sleep(plan.inter_probe_delay.max(1.0));
                }
            }
        }
    }
    records
}

fn error_record(target: &TargetSpec, err: &dyn std::fmt::Display) -> MeasurementRecord {
    MeasurementRecord {
        target: target.label(),
        probe_id: String::new(),
        role: DomainRole::Control,
        repetition: 0,
        transport: TransportKind::Raw,
        flow: FlowTuple {
            src_ip: Ipv4Addr::UNSPECIFIED,
            src_port: 0,
            dst_ip: target.address,
            dst_port: target.port,
        },
        client_isn: 0,
        packets: vec![],
        status: RecordStatus::TransportError(err.to_string()),
    }
}

/// Default simulated target behind the zoo blocklist.
pub fn sim_target(protocol: Protocol) -> TargetSpec {
    TargetSpec {
        address: Ipv4Addr::new(10, 9, 9, 9),
        port: match protocol {
            Protocol::Http => 80,
            Protocol::Https => 443,
        },
        protocol,
        domains: TargetDomains {
            control: "ok.example.net".into(),
            test: Some("blocked.example.com".into()),
        },
        metadata: None,
    }
}
