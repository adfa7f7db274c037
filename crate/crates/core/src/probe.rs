//! Declarative probe configurations: the YAML file format, validation,
//! canonical serialization, and instantiation against a concrete target.

use std::net::Ipv4Addr;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::appmsg::{
    render_http, render_tls, AppMessage, ClientHelloConfig, DomainPair, DomainRole,
    TlsRecordSpec, DOMAIN_PLACEHOLDER, HTTP_REQUEST_TEMPLATE,
};
use crate::packet::{
    ChecksumSpec, IpOption, Override, RelativeSeq, SeqBase, TcpFlags, TcpOption,
};

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("semantic error: {0}")]
    Semantic(String),
    #[error("target has no {0} domain")]
    MissingDomain(&'static str),
    #[error("probe does not support protocol {0:?}")]
    ProtocolMismatch(Protocol),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Concrete protocol of one measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Http,
    Https,
}

impl Protocol {
    pub fn other(self) -> Protocol {
        match self {
            Protocol::Http => Protocol::Https,
            Protocol::Https => Protocol::Http,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Http => "http",
            Protocol::Https => "https",
        }
    }
}

impl std::str::FromStr for Protocol {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "http" => Ok(Protocol::Http),
            "https" => Ok(Protocol::Https),
            other => Err(format!("unknown protocol {other:?}")),
        }
    }
}

/// Which protocols a probe file applies to (`protocol:` field).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProtocolScope {
    #[serde(rename = "http")]
    Http,
    #[serde(rename = "https")]
    Https,
    #[serde(rename = "http/https")]
    Both,
}

impl ProtocolScope {
    pub fn supports(self, p: Protocol) -> bool {
        matches!(
            (self, p),
            (ProtocolScope::Both, _)
                | (ProtocolScope::Http, Protocol::Http)
                | (ProtocolScope::Https, Protocol::Https)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Metadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mutation_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct HttpMessageSpec {
    pub request: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_prefix: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_suffix: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TlsMessageSpec {
    #[serde(default)]
    pub client_hello_config: ClientHelloConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub records: Vec<TlsRecordSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ApplicationMessage {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub http: Option<HttpMessageSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tls: Option<TlsMessageSpec>,
}

/// `protocol:` field value allowing either a name or a raw number.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IpProtoField {
    Name(String),
    Num(u8),
}

impl IpProtoField {
    pub fn to_u8(&self) -> u8 {
        match self {
            IpProtoField::Num(n) => *n,
            IpProtoField::Name(s) => match s.as_str() {
                "tcp" => 6,
                "udp" => 17,
                other => other.parse().unwrap_or(6),
            },
        }
    }
}

/// Checksum field: `corrupt`, or a literal 16-bit override.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChecksumField {
    Keyword(String),
    Value(u16),
}

impl ChecksumField {
    pub fn to_spec(&self) -> ChecksumSpec {
        match self {
            ChecksumField::Value(v) => ChecksumSpec::Value(*v),
            ChecksumField::Keyword(k) if k == "corrupt" => ChecksumSpec::Corrupt,
            ChecksumField::Keyword(_) => ChecksumSpec::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct IpSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub version: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tos: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ttl: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<u16>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub protocol: Option<IpProtoField>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reserved_flag: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dont_fragment: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub more_fragments: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fragment_offset: Option<u16>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checksum: Option<ChecksumField>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total_length: Option<u16>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ip_options: Option<Vec<IpOptionSpec>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct IpOptionSpec {
    pub ip_option_type: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ip_option_length: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ip_option_data: Option<String>,
}

impl IpOptionSpec {
    fn to_option(&self) -> IpOption {
        IpOption {
            kind: self.ip_option_type,
            length: match self.ip_option_length {
                Some(l) => Override::Value(l),
                None => Override::Auto,
            },
            value: self
                .ip_option_data
                .as_deref()
                .map(|h| hex::decode(h).unwrap_or_default())
                .unwrap_or_default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TcpOptionSpec {
    pub tcp_option_type: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tcp_option_length: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tcp_option_data: Option<String>,
}

impl TcpOptionSpec {
    fn to_option(&self) -> TcpOption {
        TcpOption {
            kind: self.tcp_option_type,
            length: match self.tcp_option_length {
                Some(l) => Override::Value(l),
                None => Override::Auto,
            },
            data: self
                .tcp_option_data
                .as_deref()
                .map(|h| hex::decode(h).unwrap_or_default())
                .unwrap_or_default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct FlagsSpec {
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub fin: bool,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub syn: bool,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub rst: bool,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub psh: bool,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub ack: bool,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub urg: bool,
}

impl FlagsSpec {
    pub fn to_flags(self) -> TcpFlags {
        let mut f = 0;
        if self.fin {
            f |= TcpFlags::FIN;
        }
        if self.syn {
            f |= TcpFlags::SYN;
        }
        if self.rst {
            f |= TcpFlags::RST;
        }
        if self.psh {
            f |= TcpFlags::PSH;
        }
        if self.ack {
            f |= TcpFlags::ACK;
        }
        if self.urg {
            f |= TcpFlags::URG;
        }
        TcpFlags(f)
    }

    pub fn from_flags(f: TcpFlags) -> Self {
        FlagsSpec {
            fin: f.fin(),
            syn: f.syn(),
            rst: f.rst(),
            psh: f.psh(),
            ack: f.ack(),
            urg: f.urg(),
        }
    }
}

/// Payload for packets that do not carry a slice of the application message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", deny_unknown_fields)]
pub enum PayloadSpec {
    /// Seeded random bytes, recorded in the spec for determinism.
    Random { length: usize, seed: u64 },
    /// Well-formed request for the measurement protocol, Control domain.
    ControlRequest,
    /// Well-formed Control request of the *other* protocol.
    AltProto,
    RawHex { hex: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PayloadPrefix {
    pub fill: u8,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct TcpSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub src_port: Option<u16>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dst_port: Option<u16>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seq: Option<RelativeSeq>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ack: Option<RelativeSeq>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_offset: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flags: Option<FlagsSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<u16>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checksum: Option<ChecksumField>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub urgent_pointer: Option<u16>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tcp_options: Option<Vec<TcpOptionSpec>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message_offset: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message_length: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reverse_domain: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub payload: Option<PayloadSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub payload_prefix: Option<PayloadPrefix>,
    /// False for inserted packets whose bytes must not advance the
    /// executor's NextExpected tracking.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub advance_seq: Option<bool>,
}

/// Response the executor should wait for before sending the next packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponsePredicate {
    Synack,
    Ack,
    /// Any application-layer bytes from the peer.
    Response,
    Any,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FragLayer {
    Ip,
    Tcp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase")]
pub enum Anchor {
    #[default]
    Begin,
    DomainStart,
    DomainEnd,
    End,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct FragPart {
    pub start_anchor: Anchor,
    pub start: i64,
    pub end_anchor: Anchor,
    pub end: i64,
    /// Take bytes from the reversed-domain serialization.
    pub reversed: bool,
    /// Emit unrelated fragments (own IPID, random payload) instead of a range.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dummy: Option<DummySpec>,
    pub delay: f64,
}

impl Default for FragPart {
    fn default() -> Self {
        FragPart {
            start_anchor: Anchor::Begin,
            start: 0,
            end_anchor: Anchor::End,
            end: 0,
            reversed: false,
            dummy: None,
            delay: 0.0,
        }
    }
}

impl FragPart {
    pub fn range(start_anchor: Anchor, start: i64, end_anchor: Anchor, end: i64) -> Self {
        FragPart { start_anchor, start, end_anchor, end, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DummySpec {
    pub count: usize,
    pub length: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase")]
pub enum FragOrder {
    #[default]
    InOrder,
    Reversed,
}

/// Multi-packet emission of one step: IP fragmentation or TCP segmentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct FragmentSpec {
    pub layer: FragLayer,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_size: Option<usize>,
    #[serde(default, skip_serializing_if = "is_default_order")]
    pub order: FragOrder,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parts: Option<Vec<FragPart>>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub inter_delay: f64,
}

fn is_default_order(o: &FragOrder) -> bool {
    *o == FragOrder::InOrder
}

fn is_zero(f: &f64) -> bool {
    *f == 0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct PacketStepSpec {
    /// Accepted for file compatibility; link-layer fields are not modeled.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ethernet: Option<serde_yaml::Value>,
    pub ip: IpSpec,
    pub tcp: TcpSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delay: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wait_for: Option<ResponsePredicate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fragment: Option<FragmentSpec>,
}

/// One measurement's full declarative packet sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ProbeConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub protocol: ProtocolScope,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<Metadata>,
    #[serde(default)]
    pub application_message: ApplicationMessage,
    pub packets: Vec<PacketStepSpec>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub append_control_request: bool,
}

impl ProbeConfig {
    pub fn id(&self) -> &str {
        self.id.as_deref().unwrap_or("Unnamed")
    }

    pub fn validate(&self) -> Result<(), ProbeError> {
        if self.packets.is_empty() {
            return Err(ProbeError::Semantic("packet sequence is empty".into()));
        }
        let mut syn_seen = false;
        for (i, step) in self.packets.iter().enumerate() {
            let flags = step.tcp.flags.unwrap_or_default();
            if flags.syn {
                syn_seen = true;
            }
            if matches!(step.wait_for, Some(ResponsePredicate::Synack)) && !syn_seen {
                return Err(ProbeError::Semantic(format!(
                    "step {i} waits for SYN-ACK before any SYN was sent"
                )));
            }
            if let Some(off) = step.tcp.message_offset {
                if off < 0 {
                    return Err(ProbeError::Semantic(format!(
                        "step {i} has negative messageOffset"
                    )));
                }
            }
            if let Some(len) = step.tcp.message_length {
                if len < -1 {
                    return Err(ProbeError::Semantic(format!(
                        "step {i} has invalid messageLength"
                    )));
                }
            }
        }
        if !syn_seen {
            return Err(ProbeError::Semantic("sequence contains no client SYN".into()));
        }
        if let Some(http) = &self.application_message.http {
            if http.request.matches(DOMAIN_PLACEHOLDER).count() != 1 {
                return Err(ProbeError::Semantic(
                    "HTTP template must contain exactly one domain placeholder".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Parse and validate a probe document.
pub fn load_probe(bytes: &[u8]) -> Result<ProbeConfig, ProbeError> {
    let cfg: ProbeConfig =
        serde_yaml::from_slice(bytes).map_err(|e| ProbeError::Schema(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_probe_file(path: &Path) -> Result<ProbeConfig, ProbeError> {
    load_probe(&std::fs::read(path)?)
}

/// Canonical, diff-stable serialization: same config, same bytes.
pub fn save_probe(cfg: &ProbeConfig) -> Vec<u8> {
    serde_yaml::to_string(cfg).expect("probe serializes").into_bytes()
}

// ---------------------------------------------------------------------------
// Instantiation

/// A concrete plan step: everything resolved except SEQ/ACK numbers, which
/// stay symbolic until execution.
#[derive(Debug, Clone)]
pub struct PlanStep {
    pub ip: crate::packet::Ipv4Header,
    pub seq: RelativeSeq,
    pub ack: RelativeSeq,
    pub data_offset: Override<u8>,
    pub flags: TcpFlags,
    pub window: u16,
    pub checksum: ChecksumSpec,
    pub urgent_pointer: u16,
    pub options: Vec<TcpOption>,
    pub payload: Vec<u8>,
    /// Same payload slice taken from the reversed-domain message.
    pub payload_reversed: Option<Vec<u8>>,
    /// Domain span relative to this step's payload, when it carries one.
    pub domain_span: Option<(usize, usize)>,
    pub fragment: Option<FragmentSpec>,
    pub wait_for: Option<ResponsePredicate>,
    pub delay_after: f64,
    pub advances_seq: bool,
}

/// A fully instantiated probe for one (target, role) measurement.
#[derive(Debug, Clone)]
pub struct ExecutablePlan {
    pub probe_id: String,
    pub protocol: Protocol,
    pub role: DomainRole,
    pub dst: Ipv4Addr,
    pub dst_port: u16,
    pub steps: Vec<PlanStep>,
}

/// Render the baseline application message for `protocol` with the given
/// domain; used for both the measured message and Control/altProto payloads.
pub fn render_message(
    cfg: &ProbeConfig,
    protocol: Protocol,
    domain: &str,
    control_domain: &str,
    padded_len: usize,
) -> AppMessage {
    match protocol {
        Protocol::Http => {
            let http = cfg.application_message.http.clone().unwrap_or(HttpMessageSpec {
                request: HTTP_REQUEST_TEMPLATE.into(),
                domain_prefix: None,
                domain_suffix: None,
            });
            render_http(
                &http.request,
                domain,
                control_domain,
                http.domain_prefix.as_deref().unwrap_or(""),
                http.domain_suffix.as_deref().unwrap_or(""),
                padded_len,
            )
        }
        Protocol::Https => {
            let tls = cfg.application_message.tls.clone().unwrap_or_default();
            render_tls(&tls.client_hello_config, &tls.records, domain, padded_len)
        }
    }
}

impl ProbeConfig {
    /// Substitute the chosen domain and produce a concrete plan. SEQ/ACK
    /// numbers remain symbolic until execution.
    pub fn instantiate(
        &self,
        target: &crate::prober::TargetSpec,
        role: DomainRole,
    ) -> Result<ExecutablePlan, ProbeError> {
        let protocol = target.protocol;
        if !self.protocol.supports(protocol) {
            return Err(ProbeError::ProtocolMismatch(protocol));
        }
        let domain = match role {
            DomainRole::Control => target.domains.control.clone(),
            DomainRole::Test => match &target.domains.test {
                Some(t) => t.clone(),
                None => return Err(ProbeError::MissingDomain("test")),
            },
        };
        let pair = DomainPair::new(
            target.domains.control.clone(),
            target.domains.test.clone().unwrap_or_else(|| target.domains.control.clone()),
        );
        let padded = pair.padded_len();
        let message = render_message(self, protocol, &domain, &pair.control, padded);
        let control_msg = render_message(self, protocol, &pair.control, &pair.control, padded);
        let alt_msg = {
            // Other-protocol Control request built from defaults.
            let empty = ProbeConfig {
                id: None,
                protocol: ProtocolScope::Both,
                metadata: None,
                application_message: ApplicationMessage::default(),
                packets: vec![],
                append_control_request: false,
            };
            render_message(&empty, protocol.other(), &pair.control, &pair.control, padded)
        };

        let mut steps = Vec::new();
        let mut request_index: Option<usize> = None;
        for (i, spec) in self.packets.iter().enumerate() {
            let step = build_step(spec, &message, &control_msg, &alt_msg)?;
            if spec.tcp.message_offset.is_some() {
                request_index = Some(i);
            }
            steps.push(step);
        }

        if self.append_control_request {
            let idx = request_index.map(|i| i + 1).unwrap_or(steps.len());
            let mut extra = PlanStep {
                ip: default_ip(),
                seq: RelativeSeq::next(),
                ack: RelativeSeq::next(),
                data_offset: Override::Auto,
                flags: TcpFlags::from_letters("PA"),
                window: 65535,
                checksum: ChecksumSpec::Auto,
                urgent_pointer: 0,
                options: vec![],
                payload: control_msg.bytes.clone(),
                payload_reversed: None,
                domain_span: None,
                fragment: None,
                wait_for: None,
                delay_after: 0.0,
                advances_seq: true,
            };
            extra.ip.identification = 50000;
            steps.insert(idx, extra);
        }

        let mut plan = ExecutablePlan {
            probe_id: self.id().to_string(),
            protocol,
            role,
            dst: target.address,
            dst_port: target.port,
            steps,
        };
        for step in &mut plan.steps {
            step.ip.dst = target.address;
        }
        Ok(plan)
    }
}

fn default_ip() -> crate::packet::Ipv4Header {
    crate::packet::Ipv4Header::new(Ipv4Addr::UNSPECIFIED, Ipv4Addr::UNSPECIFIED)
}

fn build_step(
    spec: &PacketStepSpec,
    message: &AppMessage,
    control_msg: &AppMessage,
    alt_msg: &AppMessage,
) -> Result<PlanStep, ProbeError> {
    let mut ip = default_ip();
    if let Some(v) = spec.ip.version {
        ip.version = v;
    }
    if let Some(v) = spec.ip.tos {
        ip.tos = v;
    }
    if let Some(v) = spec.ip.ttl {
        ip.ttl = v;
    }
    if let Some(v) = spec.ip.id {
        ip.identification = v;
    }
    if let Some(p) = &spec.ip.protocol {
        ip.protocol = p.to_u8();
    }
    if let Some(v) = spec.ip.reserved_flag {
        ip.reserved_bit = v;
    }
    if let Some(v) = spec.ip.dont_fragment {
        ip.dont_fragment = v;
    }
    if let Some(v) = spec.ip.more_fragments {
        ip.more_fragments = v;
    }
    if let Some(v) = spec.ip.fragment_offset {
        ip.fragment_offset = v;
    }
    if let Some(c) = &spec.ip.checksum {
        ip.checksum = match c.to_spec() {
            ChecksumSpec::Value(v) => Override::Value(v),
            ChecksumSpec::Corrupt => Override::Value(0xdead),
            ChecksumSpec::Auto => Override::Auto,
        };
    }
    if let Some(v) = spec.ip.total_length {
        ip.total_length = Override::Value(v);
    }
    if let Some(opts) = &spec.ip.ip_options {
        ip.options = opts.iter().map(|o| o.to_option()).collect();
    }

    // Payload: message slice, explicit payload spec, or empty.
    let (mut payload, mut payload_reversed, mut domain_span) = (vec![], None, None);
    if let Some(off) = spec.tcp.message_offset {
        let off = off as usize;
        let len = match spec.tcp.message_length {
            Some(-1) | None => message.bytes.len().saturating_sub(off),
            Some(l) => l as usize,
        };
        if off + len > message.bytes.len() {
            return Err(ProbeError::Semantic(format!(
                "message window {off}+{len} out of range ({} bytes)",
                message.bytes.len()
            )));
        }
        let source = if spec.tcp.reverse_domain.unwrap_or(false) {
            message.reversed()
        } else {
            message.bytes.clone()
        };
        payload = source[off..off + len].to_vec();
        payload_reversed = Some(message.reversed()[off..off + len].to_vec());
        let (ds, dl) = message.domain_span;
        if ds >= off && ds + dl <= off + len {
            domain_span = Some((ds - off, dl));
        }
    } else if let Some(p) = &spec.tcp.payload {
        payload = match p {
            PayloadSpec::Random { length, seed } => {
                use rand::{RngCore, SeedableRng};
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(*seed);
                let mut buf = vec![0u8; *length];
                rng.fill_bytes(&mut buf);
                buf
            }
            PayloadSpec::ControlRequest => control_msg.bytes.clone(),
            PayloadSpec::AltProto => alt_msg.bytes.clone(),
            PayloadSpec::RawHex { hex: h } => {
                hex::decode(h).map_err(|e| ProbeError::Semantic(e.to_string()))?
            }
        };
    }
    if let Some(prefix) = &spec.tcp.payload_prefix {
        let mut full = vec![prefix.fill; prefix.count];
        full.extend_from_slice(&payload);
        payload = full;
        domain_span = domain_span.map(|(o, l)| (o + prefix.count, l));
        payload_reversed = payload_reversed.map(|pr| {
            let mut full = vec![prefix.fill; prefix.count];
            full.extend_from_slice(&pr);
            full
        });
    }

    Ok(PlanStep {
        ip,
        seq: spec.tcp.seq.unwrap_or_else(RelativeSeq::next),
        ack: spec.tcp.ack.unwrap_or_else(RelativeSeq::next),
        data_offset: match spec.tcp.data_offset {
            Some(v) => Override::Value(v),
            None => Override::Auto,
        },
        flags: spec.tcp.flags.unwrap_or_default().to_flags(),
        window: spec.tcp.window.unwrap_or(65535),
        checksum: spec.tcp.checksum.as_ref().map(|c| c.to_spec()).unwrap_or(ChecksumSpec::Auto),
        urgent_pointer: spec.tcp.urgent_pointer.unwrap_or(0),
        options: spec
            .tcp
            .tcp_options
            .as_ref()
            .map(|v| v.iter().map(|o| o.to_option()).collect())
            .unwrap_or_default(),
        payload,
        payload_reversed,
        domain_span,
        fragment: spec.fragment.clone(),
        wait_for: spec.wait_for,
        delay_after: spec.delay.unwrap_or(0.0),
        advances_seq: spec.tcp.advance_seq.unwrap_or(true),
    })
}

#[allow(unused)]
fn seq_base_name(b: SeqBase) -> &'static str {
    match b {
        SeqBase::ClientIsn => "clientIsn",
        SeqBase::ServerIsn => "serverIsn",
        SeqBase::NextExpected => "nextExpected",
    }
}
