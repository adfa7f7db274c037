//! Deterministic enumeration of single-mutation candidate probes from the
//! baseline sequence: insertions, mutations, and fragmentations.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::appmsg::HTTP_REQUEST_TEMPLATE;
use crate::packet::{RelativeSeq, SeqBase, TcpFlags};
use crate::probe::{
    Anchor, ApplicationMessage, ChecksumField, DummySpec, FlagsSpec, FragLayer, FragOrder,
    FragPart, FragmentSpec, HttpMessageSpec, IpOptionSpec, Metadata, PacketStepSpec, PayloadPrefix,
    PayloadSpec, ProbeConfig, Protocol, ProtocolScope, ResponsePredicate, TcpOptionSpec,
    TcpSpec, TlsMessageSpec,
};

pub const GENERATOR_VERSION: &str = "1.0";

// ---------------------------------------------------------------------------
// Baseline

fn flags(letters: &str) -> FlagsSpec {
    FlagsSpec::from_flags(TcpFlags::from_letters(letters))
}

fn syn_step() -> PacketStepSpec {
    PacketStepSpec {
        tcp: TcpSpec {
            flags: Some(flags("S")),
            window: Some(64240),
            tcp_options: Some(vec![
                TcpOptionSpec {
                    tcp_option_type: 2,
                    tcp_option_length: Some(4),
                    tcp_option_data: Some("05b4".into()),
                },
                TcpOptionSpec { tcp_option_type: 1, tcp_option_length: None, tcp_option_data: None },
                TcpOptionSpec {
                    tcp_option_type: 3,
                    tcp_option_length: Some(3),
                    tcp_option_data: Some("06".into()),
                },
            ]),
            ..Default::default()
        },
        wait_for: Some(ResponsePredicate::Synack),
        ..Default::default()
    }
}

fn ack_step() -> PacketStepSpec {
    PacketStepSpec { tcp: TcpSpec { flags: Some(flags("A")), ..Default::default() }, ..Default::default() }
}

fn request_step() -> PacketStepSpec {
    PacketStepSpec {
        tcp: TcpSpec {
            flags: Some(flags("PA")),
            message_offset: Some(0),
            message_length: Some(-1),
            ..Default::default()
        },
        wait_for: Some(ResponsePredicate::Response),
        ..Default::default()
    }
}

fn fin_step() -> PacketStepSpec {
    PacketStepSpec { tcp: TcpSpec { flags: Some(flags("FA")), ..Default::default() }, ..Default::default() }
}

/// Index of the application-request step within the baseline sequence.
pub const REQUEST_STEP: usize = 2;

/// The five-step baseline: SYN, handshake ACK, request, FIN/ACK, ACK.
pub fn baseline(scope: ProtocolScope) -> ProbeConfig {
    ProbeConfig {
        id: Some("Baseline".into()),
        protocol: scope,
        metadata: Some(Metadata {
            layer: None,
            mutation_type: Some("baseline".into()),
            description: Some("unmutated reference sequence".into()),
        }),
        application_message: ApplicationMessage::default(),
        packets: vec![syn_step(), ack_step(), request_step(), fin_step(), ack_step()],
        append_control_request: false,
    }
}

fn probe(id: String, scope: ProtocolScope, layer: &str, kind: &str, packets: Vec<PacketStepSpec>) -> ProbeConfig {
    ProbeConfig {
        id: Some(id),
        protocol: scope,
        metadata: Some(Metadata {
            layer: Some(layer.into()),
            mutation_type: Some(kind.into()),
            description: None,
        }),
        application_message: ApplicationMessage::default(),
        packets,
        append_control_request: false,
    }
}

/// Give every step a timestamp option with increasing TSval; the step at
/// `stale` (if any) instead gets a TSval below its predecessors'.
fn add_timestamps(cfg: &mut ProbeConfig, stale: Option<usize>) {
    for (i, step) in cfg.packets.iter_mut().enumerate() {
        let tsval: u32 = if Some(i) == stale { 900 } else { 1000 + i as u32 };
        let data = format!("{:08x}{:08x}", tsval, 0);
        let opts = step.tcp.tcp_options.get_or_insert_with(Vec::new);
        opts.push(TcpOptionSpec { tcp_option_type: 1, tcp_option_length: None, tcp_option_data: None });
        opts.push(TcpOptionSpec { tcp_option_type: 1, tcp_option_length: None, tcp_option_data: None });
        opts.push(TcpOptionSpec {
            tcp_option_type: 8,
            tcp_option_length: Some(10),
            tcp_option_data: Some(data),
        });
    }
}

// ---------------------------------------------------------------------------
// Insertions

const INSERT_POSITIONS: &[&str] = &["I0", "I1", "I2", "I3"];
const INSERT_FLAGS: &[&str] = &["P", "A", "PA", "R", "RA", "RP", "PU", "PAU"];
const INSERT_PAYLOADS: &[&str] = &["", "random", "controlRequest", "altProto"];
const INSERT_OPTIONS: &[&str] = &["", "checksum", "outwindowSeq", "inwindowSeq", "md5", "timestamp"];

fn md5_option() -> TcpOptionSpec {
    TcpOptionSpec {
        tcp_option_type: 19,
        tcp_option_length: Some(18),
        tcp_option_data: Some("aa".repeat(16)),
    }
}

fn insert_step(f: &str, d: &str, o: &str, seed: u64) -> PacketStepSpec {
    let mut tcp = TcpSpec {
        flags: Some(flags(f)),
        advance_seq: Some(false),
        ..Default::default()
    };
    tcp.payload = match d {
        "" => None,
        "random" => Some(PayloadSpec::Random { length: 64, seed }),
        "controlRequest" => Some(PayloadSpec::ControlRequest),
        "altProto" => Some(PayloadSpec::AltProto),
        other => Some(PayloadSpec::RawHex { hex: hex::encode(other) }),
    };
    match o {
        "checksum" => tcp.checksum = Some(ChecksumField::Keyword("corrupt".into())),
        "outwindowSeq" => {
            tcp.seq = Some(RelativeSeq { base: SeqBase::NextExpected, offset: 100_000 })
        }
        "inwindowSeq" => tcp.seq = Some(RelativeSeq { base: SeqBase::NextExpected, offset: 1000 }),
        "md5" => tcp.tcp_options = Some(vec![md5_option()]),
        _ => {}
    }
    PacketStepSpec { tcp, ..Default::default() }
}

/// Insertion probes: four positions relative to the handshake, crossed with
/// flag combinations, payload variants, and validity twists.
pub fn enumerate_insertions() -> Vec<ProbeConfig> {
    let mut out = Vec::new();
    for (pi, pos) in INSERT_POSITIONS.iter().enumerate() {
        for f in INSERT_FLAGS {
            for d in INSERT_PAYLOADS {
                for o in INSERT_OPTIONS {
                    let id = format!("Insert[p:{pos};f:{f};d:{d};option:{o}]");
                    let seed = 0x517 ^ ((pi as u64) << 8);
                    let ins = insert_step(f, d, o, seed);
                    let mut packets = vec![syn_step(), ack_step(), request_step(), fin_step(), ack_step()];
                    let insert_at = match *pos {
                        "I0" => 0,
                        // I1 goes out after the SYN but before the SYN-ACK
                        // arrives: the wait moves onto the inserted step.
                        "I1" => {
                            packets[0].wait_for = None;
                            1
                        }
                        "I2" => 1,
                        _ => 2,
                    };
                    let mut ins = ins;
                    if *pos == "I1" {
                        ins.wait_for = Some(ResponsePredicate::Synack);
                    }
                    packets.insert(insert_at, ins);
                    let mut cfg = probe(id, ProtocolScope::Both, "TCP", "insertion", packets);
                    if o == &"timestamp" {
                        add_timestamps(&mut cfg, Some(insert_at));
                    }
                    out.push(cfg);
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Mutations

fn base_packets() -> Vec<PacketStepSpec> {
    vec![syn_step(), ack_step(), request_step(), fin_step(), ack_step()]
}

fn mutate_probe(id: &str, layer: &str, edit: impl FnOnce(&mut Vec<PacketStepSpec>)) -> ProbeConfig {
    let mut packets = base_packets();
    edit(&mut packets);
    probe(id.into(), ProtocolScope::Both, layer, "mutation", packets)
}

fn http_probe(id: &str, request: String) -> ProbeConfig {
    let mut cfg = probe(id.into(), ProtocolScope::Http, "HTTP", "mutation", base_packets());
    cfg.application_message.http =
        Some(HttpMessageSpec { request, domain_prefix: None, domain_suffix: None });
    cfg
}

fn domain_probe(id: &str, scope: ProtocolScope, prefix: &str, suffix: &str) -> ProbeConfig {
    let layer = if scope == ProtocolScope::Http { "HTTP" } else { "TLS" };
    let mut cfg = probe(id.into(), scope, layer, "mutation", base_packets());
    match scope {
        ProtocolScope::Http => {
            cfg.application_message.http = Some(HttpMessageSpec {
                request: HTTP_REQUEST_TEMPLATE.into(),
                domain_prefix: some_if(prefix),
                domain_suffix: some_if(suffix),
            });
        }
        _ => {
            let mut tls = TlsMessageSpec::default();
            tls.client_hello_config.sni_prefix = some_if(prefix);
            tls.client_hello_config.sni_suffix = some_if(suffix);
            cfg.application_message.tls = Some(tls);
        }
    }
    cfg
}

fn some_if(s: &str) -> Option<String> {
    if s.is_empty() { None } else { Some(s.into()) }
}

fn first_line_delim(template: &str, delim: char) -> String {
    match template.split_once("\r\n") {
        Some((line, rest)) => format!("{}\r\n{}", line.replace(' ', &delim.to_string()), rest),
        None => template.into(),
    }
}

/// One probe per (field, mutant value) over the A.5 in-scope IP, TCP, and
/// application-layer fields.
pub fn enumerate_mutations(protocol: Protocol) -> Vec<ProbeConfig> {
    let mut out: Vec<ProbeConfig> = Vec::new();
    let r = REQUEST_STEP;

    // IP header fields.
    out.push(mutate_probe("Mutate[l:IP;f:flag;flags:M]", "IP", |p| {
        p[r].ip.more_fragments = Some(true)
    }));
    out.push(mutate_probe("Mutate[l:IP;f:flag;flags:E]", "IP", |p| {
        p[r].ip.reserved_flag = Some(true)
    }));
    out.push(mutate_probe("Mutate[l:IP;f:flag;flags:ME]", "IP", |p| {
        p[r].ip.more_fragments = Some(true);
        p[r].ip.reserved_flag = Some(true);
    }));
    out.push(mutate_probe("Mutate[l:IP;f:id;value:65535]", "IP", |p| p[r].ip.id = Some(65535)));
    out.push(mutate_probe("Mutate[l:IP;f:fragmentOffset;value:1]", "IP", |p| {
        p[r].ip.fragment_offset = Some(1)
    }));
    out.push(mutate_probe("Mutate[l:IP;f:protocol;value:17]", "IP", |p| {
        p[r].ip.protocol = Some(crate::probe::IpProtoField::Num(17))
    }));
    out.push(mutate_probe("Mutate[l:IP;f:checksum;checksum:corrupt]", "IP", |p| {
        p[r].ip.checksum = Some(ChecksumField::Keyword("corrupt".into()))
    }));
    out.push(mutate_probe("Mutate[l:IP;f:option;option:noop]", "IP", |p| {
        p[r].ip.ip_options =
            Some(vec![IpOptionSpec { ip_option_type: 1, ip_option_length: None, ip_option_data: None }])
    }));
    out.push(mutate_probe("Mutate[l:IP;f:option;option:unknown]", "IP", |p| {
        p[r].ip.ip_options = Some(vec![IpOptionSpec {
            ip_option_type: 0x9e,
            ip_option_length: Some(4),
            ip_option_data: Some("0000".into()),
        }])
    }));

    // TCP fields.
    out.push(mutate_probe("Mutate[l:TCP;f:seq;option:negativeSeqWithPadding]", "TCP", |p| {
        p[r].tcp.seq = Some(RelativeSeq { base: SeqBase::ClientIsn, offset: -100 });
        p[r].tcp.payload_prefix = Some(PayloadPrefix { fill: 0, count: 101 });
    }));
    out.push(mutate_probe("Mutate[l:TCP;f:seq;value:-1]", "TCP", |p| {
        p[r].tcp.seq = Some(RelativeSeq { base: SeqBase::NextExpected, offset: -1 })
    }));
    out.push(mutate_probe("Mutate[l:TCP;f:seq;value:1]", "TCP", |p| {
        p[r].tcp.seq = Some(RelativeSeq { base: SeqBase::NextExpected, offset: 1 })
    }));
    out.push(mutate_probe("Mutate[l:TCP;f:ack;value:-1000]", "TCP", |p| {
        p[r].tcp.ack = Some(RelativeSeq { base: SeqBase::NextExpected, offset: -1000 })
    }));
    out.push(mutate_probe("Mutate[l:TCP;f:ack;value:1000]", "TCP", |p| {
        p[r].tcp.ack = Some(RelativeSeq { base: SeqBase::NextExpected, offset: 1000 })
    }));
    for fl in ["P", "", "SAFPU", "A", "PU"] {
        let id = format!("Mutate[l:TCP;f:flag;flags:{fl}]");
        out.push(mutate_probe(&id, "TCP", |p| p[r].tcp.flags = Some(flags(fl))));
    }
    for w in [0u16, 1] {
        let id = format!("Mutate[l:TCP;f:window;value:{w}]");
        out.push(mutate_probe(&id, "TCP", |p| p[r].tcp.window = Some(w)));
    }
    out.push(mutate_probe("Mutate[l:TCP;f:checksum;checksum:corrupt]", "TCP", |p| {
        p[r].tcp.checksum = Some(ChecksumField::Keyword("corrupt".into()))
    }));
    out.push(mutate_probe("Mutate[l:TCP;f:urgentPointer;option:]", "TCP", |p| {
        p[r].tcp.flags = Some(flags("PAU"));
        p[r].tcp.urgent_pointer = Some(1);
    }));
    out.push(mutate_probe("Mutate[l:TCP;f:urgentPointer;option:noack]", "TCP", |p| {
        p[r].tcp.flags = Some(flags("PU"));
        p[r].tcp.urgent_pointer = Some(1);
    }));
    {
        let mut cfg = mutate_probe("Mutate[l:TCP;f:option;option:timestamp]", "TCP", |_| {});
        add_timestamps(&mut cfg, Some(r));
        out.push(cfg);
    }
    out.push(mutate_probe("Mutate[l:TCP;f:option;option:md5]", "TCP", |p| {
        p[r].tcp.tcp_options = Some(vec![md5_option()])
    }));
    out.push(mutate_probe("Mutate[l:TCP;f:option;option:unknown]", "TCP", |p| {
        p[r].tcp.tcp_options = Some(vec![TcpOptionSpec {
            tcp_option_type: 254,
            tcp_option_length: Some(4),
            tcp_option_data: Some("0000".into()),
        }])
    }));
    out.push(mutate_probe("Mutate[l:TCP;f:option;option:badLength]", "TCP", |p| {
        p[r].tcp.tcp_options = Some(vec![TcpOptionSpec {
            tcp_option_type: 253,
            tcp_option_length: Some(40),
            tcp_option_data: Some("00".into()),
        }])
    }));
    out.push(mutate_probe("Mutate[l:TCP;f:payload;option:leadingNewline]", "TCP", |p| {
        p[r].tcp.payload_prefix = Some(PayloadPrefix { fill: 0x0a, count: 1 })
    }));

    match protocol {
        Protocol::Http => {
            let t = HTTP_REQUEST_TEMPLATE;
            out.push(http_probe(
                "Mutate[l:App;t:http;f:method;value:GeT]",
                t.replacen("GET", "GeT", 1),
            ));
            out.push(http_probe(
                "Mutate[l:App;t:http;f:method;value:GE]",
                t.replacen("GET", "GE", 1),
            ));
            out.push(http_probe(
                "Mutate[l:App;t:http;f:version;value:HTTP: 1.1]",
                t.replacen("HTTP/1.1", "HTTP: 1.1", 1),
            ));
            out.push(http_probe(
                "Mutate[l:App;t:http;f:version;value:HTTP:3]",
                t.replacen("HTTP/1.1", "HTTP:3", 1),
            ));
            out.push(http_probe(
                "Mutate[l:App;t:http;f:delimiter;char:09]",
                first_line_delim(t, '\x09'),
            ));
            out.push(http_probe(
                "Mutate[l:App;t:http;f:delimiter;char:0b]",
                first_line_delim(t, '\x0b'),
            ));
            out.push(http_probe(
                "Mutate[l:App;t:http;f:delimiter;char:r]",
                t.replace("\r\n", "\r"),
            ));
            out.push(http_probe(
                "Mutate[l:App;t:http;f:delimiter;char:n]",
                t.replace("\r\n", "\n"),
            ));
            out.push(http_probe(
                "Mutate[l:App;t:http;f:request;option:tworequest]",
                format!("GET / HTTP/1.1\r\nHost: ${{ctrl}}\r\n\r\n{t}"),
            ));
            out.push(domain_probe(
                "Mutate[l:App;t:domain;c:prepend;char:star]",
                ProtocolScope::Http,
                "**",
                "",
            ));
            out.push(domain_probe(
                "Mutate[l:App;t:domain;c:append;char:star]",
                ProtocolScope::Http,
                "",
                "**",
            ));
            out.push(domain_probe(
                "Mutate[l:App;t:domain;c:prepend;char:space]",
                ProtocolScope::Http,
                "  ",
                "",
            ));
            out.push(domain_probe(
                "Mutate[l:App;t:domain;c:append;char:space]",
                ProtocolScope::Http,
                "",
                "  ",
            ));
        }
        Protocol::Https => {
            for v in ["0304", "03ff"] {
                let id = format!("Mutate[l:App;t:tls;f:recordVersion;value:{v}]");
                let mut cfg = probe(id, ProtocolScope::Https, "TLS", "mutation", base_packets());
                let mut tls = TlsMessageSpec::default();
                tls.records = vec![crate::appmsg::TlsRecordSpec {
                    record_version: v.into(),
                    ..Default::default()
                }];
                cfg.application_message.tls = Some(tls);
                out.push(cfg);
            }
            {
                let mut cfg = probe(
                    "Mutate[l:App;t:tls;f:legacyVersion;value:0000]".into(),
                    ProtocolScope::Https,
                    "TLS",
                    "mutation",
                    base_packets(),
                );
                let mut tls = TlsMessageSpec::default();
                tls.client_hello_config.ch_version = Some("0000".into());
                cfg.application_message.tls = Some(tls);
                out.push(cfg);
            }
            {
                let mut cfg = probe(
                    "Mutate[l:App;t:tls;f:recordFragment;value:2]".into(),
                    ProtocolScope::Https,
                    "TLS",
                    "mutation",
                    base_packets(),
                );
                let mut tls = TlsMessageSpec::default();
                tls.records = vec![
                    crate::appmsg::TlsRecordSpec { offset: 0, length: 64, ..Default::default() },
                    crate::appmsg::TlsRecordSpec { offset: 64, length: -1, ..Default::default() },
                ];
                cfg.application_message.tls = Some(tls);
                out.push(cfg);
            }
            out.push(domain_probe(
                "Mutate[l:App;t:domain;c:prepend;char:star]",
                ProtocolScope::Https,
                "**",
                "",
            ));
            out.push(domain_probe(
                "Mutate[l:App;t:domain;c:append;char:star]",
                ProtocolScope::Https,
                "",
                "**",
            ));
            out.push(domain_probe(
                "Mutate[l:App;t:domain;c:prepend;char:space]",
                ProtocolScope::Https,
                "  ",
                "",
            ));
            out.push(domain_probe(
                "Mutate[l:App;t:domain;c:append;char:space]",
                ProtocolScope::Https,
                "",
                "  ",
            ));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Fragmentations

fn frag_probe(id: &str, spec: FragmentSpec) -> ProbeConfig {
    let mut packets = base_packets();
    packets[REQUEST_STEP].fragment = Some(spec);
    let layer = match spec_layer(&packets) {
        FragLayer::Ip => "IP",
        FragLayer::Tcp => "TCP",
    };
    probe(id.into(), ProtocolScope::Both, layer, "fragmentation", packets)
}

fn spec_layer(packets: &[PacketStepSpec]) -> FragLayer {
    packets[REQUEST_STEP].fragment.as_ref().map(|f| f.layer).unwrap_or(FragLayer::Tcp)
}

fn simple_frag(layer: FragLayer, count: Option<usize>, first_size: Option<usize>) -> FragmentSpec {
    FragmentSpec { layer, count, first_size, order: FragOrder::InOrder, parts: None, inter_delay: 0.0 }
}

/// The nine Fig. 5 overlap alignments: X carries the original domain, Y the
/// word-reversed domain, sent X-then-Y between a head and a tail part so
/// reassembly completes only after both are on the wire.
pub fn overlap_parts(left: &str, right: &str, unit: i64) -> Vec<FragPart> {
    let u = unit;
    let (xl, xr) = (-u, u);
    let yl = match left {
        "short" => 0,
        "equal" => -u,
        _ => -2 * u,
    };
    let yr = match right {
        "short" => 0,
        "equal" => u,
        _ => 2 * u,
    };
    let mut x = FragPart::range(Anchor::DomainStart, xl, Anchor::DomainEnd, xr);
    let mut y = FragPart::range(Anchor::DomainStart, yl, Anchor::DomainEnd, yr);
    x.reversed = false;
    y.reversed = true;
    vec![
        FragPart::range(Anchor::Begin, 0, Anchor::DomainStart, xl.min(yl)),
        x,
        y,
        FragPart::range(Anchor::DomainEnd, xr.max(yr), Anchor::End, 0),
    ]
}

/// Fragmentation and segmentation probes: counts, sizes, ordering, delays,
/// dummy-IPID disorder, and the nine overlap alignments at both layers.
pub fn enumerate_fragmentations(_protocol: Protocol) -> Vec<ProbeConfig> {
    let mut out = Vec::new();

    for n in [2usize, 3, 8, 32, 55] {
        out.push(frag_probe(
            &format!("Fragment[l:IP;t:fragmentNum;num:{n}]"),
            simple_frag(FragLayer::Ip, Some(n), None),
        ));
    }
    for n in [2usize, 3, 8, 32] {
        out.push(frag_probe(
            &format!("Fragment[l:TCP;t:fragmentNum;num:{n}]"),
            simple_frag(FragLayer::Tcp, Some(n), None),
        ));
    }
    out.push(frag_probe(
        "Fragment[l:TCP;t:fragmentSize;size:8]",
        simple_frag(FragLayer::Tcp, None, Some(8)),
    ));

    let mut outorder_ip = simple_frag(FragLayer::Ip, Some(3), None);
    outorder_ip.order = FragOrder::Reversed;
    out.push(frag_probe("Fragment[l:IP;t:outorder]", outorder_ip));
    let mut outorder_tcp = simple_frag(FragLayer::Tcp, Some(3), None);
    outorder_tcp.order = FragOrder::Reversed;
    out.push(frag_probe("Fragment[l:TCP;t:outorder]", outorder_tcp));

    for secs in [10.0f64, 35.0] {
        let mut f = simple_frag(FragLayer::Ip, Some(2), None);
        f.inter_delay = secs;
        out.push(frag_probe(&format!("Fragment[l:IP;t:delay;seconds:{secs}]"), f));
    }
    {
        let mut f = simple_frag(FragLayer::Tcp, Some(2), None);
        f.inter_delay = 1.0;
        out.push(frag_probe("Fragment[l:TCP;t:delay;seconds:1]", f));
    }

    for k in [2usize, 16] {
        let parts = vec![
            FragPart::range(Anchor::Begin, 0, Anchor::DomainStart, 8),
            FragPart {
                dummy: Some(DummySpec { count: k, length: 16, seed: 42 }),
                ..Default::default()
            },
            FragPart::range(Anchor::DomainStart, 8, Anchor::End, 0),
        ];
        let spec = FragmentSpec {
            layer: FragLayer::Ip,
            count: None,
            first_size: None,
            order: FragOrder::InOrder,
            parts: Some(parts),
            inter_delay: 0.0,
        };
        out.push(frag_probe(&format!("Fragment[l:IP;t:maxDist;maxdist:{k}]"), spec));
    }

    for (layer, tag, unit) in [(FragLayer::Ip, "IP", 8i64), (FragLayer::Tcp, "TCP", 2)] {
        for left in ["short", "equal", "long"] {
            for right in ["short", "equal", "long"] {
                let spec = FragmentSpec {
                    layer,
                    count: None,
                    first_size: None,
                    order: FragOrder::InOrder,
                    parts: Some(overlap_parts(left, right, unit)),
                    inter_delay: 0.0,
                };
                out.push(frag_probe(
                    &format!("Fragment[l:{tag};t:overlapping;position:l{left}r{right}]"),
                    spec,
                ));
            }
        }
    }

    out
}

// ---------------------------------------------------------------------------
// Full generation and the builtin top-40 set

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ManifestEntry {
    pub id: String,
    pub kind: String,
    pub layer: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Manifest {
    pub protocol: String,
    pub generator_version: String,
    pub total: usize,
    pub insertions: usize,
    pub mutations: usize,
    pub fragmentations: usize,
    pub entries: Vec<ManifestEntry>,
}

pub struct ProbeSet {
    pub protocol: Protocol,
    pub probes: Vec<ProbeConfig>,
    pub manifest: Manifest,
}

/// Union of the three enumerations, deduplicated by id, in stable order.
pub fn generate_all(protocol: Protocol) -> ProbeSet {
    let ins = enumerate_insertions();
    let muts = enumerate_mutations(protocol);
    let frags = enumerate_fragmentations(protocol);
    let (ni, nm, nf) = (ins.len(), muts.len(), frags.len());

    let mut probes = Vec::new();
    let mut seen = HashSet::new();
    for p in ins.into_iter().chain(muts).chain(frags) {
        if seen.insert(p.id().to_string()) {
            probes.push(p);
        }
    }
    let entries = probes
        .iter()
        .map(|p| ManifestEntry {
            id: p.id().to_string(),
            kind: p
                .metadata
                .as_ref()
                .and_then(|m| m.mutation_type.clone())
                .unwrap_or_default(),
            layer: p.metadata.as_ref().and_then(|m| m.layer.clone()).unwrap_or_default(),
        })
        .collect();
    let manifest = Manifest {
        protocol: protocol.as_str().into(),
        generator_version: GENERATOR_VERSION.into(),
        total: probes.len(),
        insertions: ni,
        mutations: nm,
        fragmentations: nf,
        entries,
    };
    ProbeSet { protocol, probes, manifest }
}

/// The 21 probes shared by both protocols in the published top-40 set.
pub const TOP40_COMMON: &[&str] = &[
    "Fragment[l:IP;t:maxDist;maxdist:16]",
    "Insert[p:I3;f:P;d:altProto;option:]",
    "Mutate[l:TCP;f:seq;option:negativeSeqWithPadding]",
    "Fragment[l:IP;t:outorder]",
    "Fragment[l:IP;t:overlapping;position:lshortrequal]",
    "Mutate[l:IP;f:option;option:noop]",
    "Mutate[l:TCP;f:checksum;checksum:corrupt]",
    "Mutate[l:TCP;f:urgentPointer;option:noack]",
    "Insert[p:I3;f:P;d:controlRequest;option:]",
    "Mutate[l:TCP;f:option;option:timestamp]",
    "Mutate[l:TCP;f:urgentPointer;option:]",
    "Fragment[l:TCP;t:overlapping;position:lequalrlong]",
    "Insert[p:I3;f:PA;d:controlRequest;option:checksum]",
    "Fragment[l:IP;t:fragmentNum;num:55]",
    "Mutate[l:IP;f:flag;flags:M]",
    "Fragment[l:TCP;t:overlapping;position:llongrshort]",
    "Mutate[l:IP;f:flag;flags:E]",
    "Mutate[l:TCP;f:option;option:md5]",
    "Fragment[l:TCP;t:fragmentSize;size:8]",
    "Fragment[l:IP;t:overlapping;position:llongrlong]",
    "Fragment[l:TCP;t:overlapping;position:lshortrequal]",
];

pub const TOP40_HTTP: &[&str] = &[
    "Fragment[l:IP;t:overlapping;position:lshortrshort]",
    "Mutate[l:App;t:http;f:version;value:HTTP: 1.1]",
    "Fragment[l:TCP;t:overlapping;position:lequalrequal]",
    "Mutate[l:App;t:http;f:method;value:GE]",
    "Insert[p:I1;f:A;d:controlRequest;option:md5]",
    "Mutate[l:TCP;f:flag;flags:SAFPU]",
    "Mutate[l:App;t:domain;c:prepend;char:star]",
    "Mutate[l:App;t:http;f:version;value:HTTP:3]",
    "Mutate[l:App;t:http;f:delimiter;char:09]",
    "Insert[p:I1;f:PU;d:controlRequest;option:timestamp]",
    "Insert[p:I3;f:R;d:;option:checksum]",
    "Mutate[l:App;t:http;f:request;option:tworequest]",
    "Mutate[l:App;t:http;f:delimiter;char:0b]",
    "Mutate[l:App;t:http;f:method;value:GeT]",
    "Insert[p:I3;f:R;d:controlRequest;option:checksum]",
    "Mutate[l:App;t:http;f:delimiter;char:r]",
    "Mutate[l:App;t:http;f:delimiter;char:n]",
    "Insert[p:I1;f:PU;d:controlRequest;option:checksum]",
    "Insert[p:I1;f:PAU;d:controlRequest;option:]",
];

pub const TOP40_HTTPS: &[&str] = &[
    "Insert[p:I3;f:PA;d:random;option:checksum]",
    "Mutate[l:App;t:domain;c:append;char:space]",
    "Mutate[l:App;t:tls;f:recordVersion;value:0304]",
    "Insert[p:I1;f:PU;d:controlRequest;option:outwindowSeq]",
    "Mutate[l:TCP;f:flag;flags:P]",
    "Fragment[l:TCP;t:fragmentNum;num:8]",
    "Fragment[l:TCP;t:fragmentNum;num:32]",
    "Fragment[l:TCP;t:overlapping;position:lequalrequal]",
    "Mutate[l:App;t:domain;c:append;char:star]",
    "Mutate[l:App;t:domain;c:prepend;char:space]",
    "Insert[p:I3;f:PU;d:controlRequest;option:inwindowSeq]",
    "Insert[p:I3;f:RA;d:;option:checksum]",
    "Mutate[l:App;t:tls;f:recordVersion;value:03ff]",
    "Mutate[l:App;t:tls;f:legacyVersion;value:0000]",
    "Insert[p:I2;f:PU;d:controlRequest;option:outwindowSeq]",
    "Insert[p:I2;f:RP;d:controlRequest;option:checksum]",
    "Insert[p:I2;f:PU;d:controlRequest;option:checksum]",
    "Insert[p:I3;f:P;d:altProto;option:outwindowSeq]",
    "Mutate[l:TCP;f:flag;flags:]",
];

/// The published 40-probe set for one protocol, in catalog order.
pub fn builtin_top40(protocol: Protocol) -> Vec<ProbeConfig> {
    let all = generate_all(protocol);
    let index: std::collections::HashMap<&str, &ProbeConfig> =
        all.probes.iter().map(|p| (p.id(), p)).collect();
    let wanted: Vec<&&str> = TOP40_COMMON
        .iter()
        .chain(match protocol {
            Protocol::Http => TOP40_HTTP.iter(),
            Protocol::Https => TOP40_HTTPS.iter(),
        })
        .collect();
    wanted
        .into_iter()
        .map(|id| {
            (*index
                .get(*id)
                .unwrap_or_else(|| panic!("builtin probe {id} missing from enumeration")))
            .clone()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probe::save_probe;

    #[test]
    fn baseline_validates() {
        baseline(ProtocolScope::Both).validate().unwrap();
    }

    #[test]
    fn all_generated_probes_validate() {
        for proto in [Protocol::Http, Protocol::Https] {
            for p in generate_all(proto).probes {
                p.validate().unwrap_or_else(|e| panic!("{}: {e}", p.id()));
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        for proto in [Protocol::Http, Protocol::Https] {
            let a = generate_all(proto);
            let b = generate_all(proto);
            let abytes: Vec<Vec<u8>> = a.probes.iter().map(save_probe).collect();
            let bbytes: Vec<Vec<u8>> = b.probes.iter().map(save_probe).collect();
            assert_eq!(abytes, bbytes);
        }
    }

    #[test]
    fn ids_are_unique() {
        for proto in [Protocol::Http, Protocol::Https] {
            let set = generate_all(proto);
            let mut ids: Vec<_> = set.probes.iter().map(|p| p.id().to_string()).collect();
            let n = ids.len();
            ids.sort();
            ids.dedup();
            assert_eq!(ids.len(), n);
            assert_eq!(set.manifest.total, n);
        }
    }

    #[test]
    fn common_table_ids_present_in_both_protocols() {
        let http: HashSet<String> =
            generate_all(Protocol::Http).probes.iter().map(|p| p.id().into()).collect();
        let https: HashSet<String> =
            generate_all(Protocol::Https).probes.iter().map(|p| p.id().into()).collect();
        for id in TOP40_COMMON {
            assert!(http.contains(*id), "missing {id} for http");
            assert!(https.contains(*id), "missing {id} for https");
        }
    }

    #[test]
    fn top40_is_forty_probes_each() {
        assert_eq!(builtin_top40(Protocol::Http).len(), 40);
        assert_eq!(builtin_top40(Protocol::Https).len(), 40);
    }

    #[test]
    fn golden_generation_counts() {
        // Manifest golden numbers; changing the grid is an intentional act.
        assert_eq!(generate_all(Protocol::Http).manifest.total, 845);
        assert_eq!(generate_all(Protocol::Https).manifest.total, 840);
    }

    #[test]
    fn overlap_probes_partition_nine_alignments() {
        let frags = enumerate_fragmentations(Protocol::Http);
        for tag in ["IP", "TCP"] {
            let mut found = HashSet::new();
            for l in ["short", "equal", "long"] {
                for r in ["short", "equal", "long"] {
                    let id = format!("Fragment[l:{tag};t:overlapping;position:l{l}r{r}]");
                    assert!(frags.iter().any(|p| p.id() == id), "missing {id}");
                    found.insert(id);
                }
            }
            assert_eq!(found.len(), 9);
        }
    }

    #[test]
    fn single_mutation_structural_diff() {
        // Every mutation probe differs from the baseline in exactly one step
        // edit cluster or in the application message (single descriptor).
        let base = baseline(ProtocolScope::Both);
        for p in enumerate_mutations(Protocol::Http) {
            if p.application_message != base.application_message {
                // Application-layer mutation: packet steps must be unchanged.
                assert_eq!(p.packets.len(), base.packets.len(), "{}", p.id());
                continue;
            }
            let changed: Vec<usize> = p
                .packets
                .iter()
                .zip(&base.packets)
                .enumerate()
                .filter(|(_, (a, b))| a != b)
                .map(|(i, _)| i)
                .collect();
            // Timestamp probes touch every step by design; everything else
            // touches exactly the request step.
            if p.id().contains("option:timestamp") {
                assert_eq!(changed.len(), base.packets.len(), "{}", p.id());
            } else {
                assert_eq!(changed, vec![REQUEST_STEP], "{}", p.id());
            }
        }
    }

    #[test]
    fn negative_seq_probe_shape() {
        let all = generate_all(Protocol::Http);
        let p = all
            .probes
            .iter()
            .find(|p| p.id() == "Mutate[l:TCP;f:seq;option:negativeSeqWithPadding]")
            .unwrap();
        let req = &p.packets[REQUEST_STEP];
        assert_eq!(req.tcp.seq, Some(RelativeSeq { base: SeqBase::ClientIsn, offset: -100 }));
        assert_eq!(req.tcp.payload_prefix, Some(PayloadPrefix { fill: 0, count: 101 }));
    }
}
