//! Application-layer message templates: HTTP request and TLS ClientHello.
//!
//! Both renderers place the hostname in a padded region that starts at an
//! even checksum-word offset and has even length, so control, test, and
//! word-reversed variants of a message all have identical length and the
//! reversal leaves the TCP checksum unchanged.

use serde::{Deserialize, Serialize};

/// Hostnames substituted into a probe's application message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainPair {
    pub control: String,
    pub test: String,
}

impl DomainPair {
    pub fn new(control: impl Into<String>, test: impl Into<String>) -> Self {
        DomainPair { control: control.into(), test: test.into() }
    }

    /// Shared padded length: fits both hostnames, rounded up to even.
    pub fn padded_len(&self) -> usize {
        let m = self.control.len().max(self.test.len());
        m + m % 2
    }

    pub fn get(&self, role: DomainRole) -> &str {
        match role {
            DomainRole::Control => &self.control,
            DomainRole::Test => &self.test,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainRole {
    Control,
    Test,
}

impl DomainRole {
    pub fn as_str(self) -> &'static str {
        match self {
            DomainRole::Control => "control",
            DomainRole::Test => "test",
        }
    }
}

/// Placeholder for the measured domain inside request templates.
pub const DOMAIN_PLACEHOLDER: &str = "${}";
/// Placeholder for the control domain (e.g. the two-requests probe).
pub const CONTROL_PLACEHOLDER: &str = "${ctrl}";

/// Default HTTP request template.
pub const HTTP_REQUEST_TEMPLATE: &str =
    "GET / HTTP/1.1\r\nHost: ${}\r\nUser-Agent: curl/8.11.1\r\nAccept: */*\r\n\r\n";

/// A rendered application message plus the byte span of the padded domain
/// region within it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AppMessage {
    pub bytes: Vec<u8>,
    /// (offset, length) of the padded domain region; always even/even.
    pub domain_span: (usize, usize),
}

impl AppMessage {
    /// Variant with the domain region reversed in 16-bit words.
    pub fn reversed(&self) -> Vec<u8> {
        crate::packet::reverse_domain_16bit(&self.bytes, self.domain_span.0, self.domain_span.1)
            .expect("domain span is aligned by construction")
    }
}

/// Render an HTTP template: the single `${}` placeholder is replaced by
/// `prefix + domain + suffix` padded with trailing spaces to `padded_len`.
/// An extra space is inserted before the region when its offset would be odd.
pub fn render_http(
    template: &str,
    domain: &str,
    control_domain: &str,
    prefix: &str,
    suffix: &str,
    padded_len: usize,
) -> AppMessage {
    let template = template.replace(CONTROL_PLACEHOLDER, control_domain);
    let idx = template
        .find(DOMAIN_PLACEHOLDER)
        .expect("template contains the domain placeholder");
    let mut head = template[..idx].to_string();
    let tail = &template[idx + DOMAIN_PLACEHOLDER.len()..];

    let mut region = format!("{prefix}{domain}{suffix}");
    let target = padded_len + prefix.len() + suffix.len();
    while region.len() < target {
        region.push(' ');
    }
    if region.len() % 2 != 0 {
        region.push(' ');
    }
    if head.len() % 2 != 0 {
        head.push(' ');
    }
    let offset = head.len();
    let len = region.len();
    let bytes = format!("{head}{region}{tail}").into_bytes();
    AppMessage { bytes, domain_span: (offset, len) }
}

/// TLS record header + ClientHello construction parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ClientHelloConfig {
    /// Legacy version inside the ClientHello, hex (default "0303").
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ch_version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sni_prefix: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sni_suffix: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TlsRecordSpec {
    /// Content type, hex (e.g. "16" = handshake).
    pub content_type: String,
    /// Record-layer protocol version, hex (e.g. "0301").
    pub record_version: String,
    /// "clienthello" slices the built ClientHello; anything else is raw hex.
    pub payload_type: String,
    #[serde(default)]
    pub offset: i64,
    /// -1 = rest of the ClientHello.
    #[serde(default = "default_record_length")]
    pub length: i64,
}

fn default_record_length() -> i64 {
    -1
}

impl Default for TlsRecordSpec {
    fn default() -> Self {
        TlsRecordSpec {
            content_type: "16".into(),
            record_version: "0301".into(),
            payload_type: "clienthello".into(),
            offset: 0,
            length: -1,
        }
    }
}

fn hex_u16(s: &str, default: u16) -> u16 {
    u16::from_str_radix(s, 16).unwrap_or(default)
}

fn hex_u8(s: &str, default: u8) -> u8 {
    u8::from_str_radix(s, 16).unwrap_or(default)
}

// Frozen cipher list for the deterministic ClientHello.
const CIPHER_SUITES: &[u16] = &[
    0x1301, 0x1302, 0x1303, 0xc02b, 0xc02f, 0xc02c, 0xc030, 0xcca9, 0xcca8, 0x009e, 0x009f,
];

/// Build the ClientHello handshake message (no record header) with the SNI
/// hostname padded to `padded_len`. `record_header_len` is the number of
/// bytes that will precede the handshake message in the final TCP payload;
/// the session-id length toggles between 0 and 1 so the hostname lands on an
/// even offset in that payload.
fn build_client_hello(
    domain: &str,
    prefix: &str,
    suffix: &str,
    padded_len: usize,
    legacy_version: u16,
    record_header_len: usize,
) -> (Vec<u8>, (usize, usize)) {
    let mut sni_host = format!("{prefix}{domain}{suffix}");
    let target = padded_len + prefix.len() + suffix.len();
    while sni_host.len() < target {
        sni_host.push(' ');
    }
    if sni_host.len() % 2 != 0 {
        sni_host.push(' ');
    }

    let build = |session_id_len: usize| -> (Vec<u8>, usize) {
        let mut body = Vec::new();
        body.extend_from_slice(&legacy_version.to_be_bytes());
        body.extend_from_slice(&[0x5a; 32]); // deterministic "random"
        body.push(session_id_len as u8);
        body.extend(std::iter::repeat(0x5a).take(session_id_len));
        body.extend_from_slice(&((CIPHER_SUITES.len() * 2) as u16).to_be_bytes());
        for c in CIPHER_SUITES {
            body.extend_from_slice(&c.to_be_bytes());
        }
        body.extend_from_slice(&[0x01, 0x00]); // null compression

        // Extensions: server_name first, then a fixed tail.
        let mut sni_ext = Vec::new();
        let name = sni_host.as_bytes();
        let list_len = name.len() + 3;
        sni_ext.extend_from_slice(&[0x00, 0x00]); // type server_name
        sni_ext.extend_from_slice(&((list_len + 2) as u16).to_be_bytes());
        sni_ext.extend_from_slice(&(list_len as u16).to_be_bytes());
        sni_ext.push(0x00); // host_name
        sni_ext.extend_from_slice(&(name.len() as u16).to_be_bytes());
        let host_rel = sni_ext.len();
        sni_ext.extend_from_slice(name);

        let mut tail = Vec::new();
        // supported_groups: x25519, secp256r1
        tail.extend_from_slice(&[0x00, 0x0a, 0x00, 0x06, 0x00, 0x04, 0x00, 0x1d, 0x00, 0x17]);
        // signature_algorithms: a small fixed list
        tail.extend_from_slice(&[
            0x00, 0x0d, 0x00, 0x08, 0x00, 0x06, 0x04, 0x03, 0x08, 0x04, 0x04, 0x01,
        ]);

        let ext_total = sni_ext.len() + tail.len();
        body.extend_from_slice(&(ext_total as u16).to_be_bytes());
        let sni_start = body.len();
        body.extend_from_slice(&sni_ext);
        body.extend_from_slice(&tail);

        let mut msg = Vec::with_capacity(body.len() + 4);
        msg.push(0x01); // handshake type client_hello
        msg.extend_from_slice(&(body.len() as u32).to_be_bytes()[1..]);
        msg.extend_from_slice(&body);
        (msg, 4 + sni_start + host_rel)
    };

    let (msg, host_off) = build(0);
    if (record_header_len + host_off) % 2 == 0 {
        let span = (host_off, sni_host.len());
        (msg, span)
    } else {
        let (msg, host_off) = build(1);
        debug_assert_eq!((record_header_len + host_off) % 2, 0);
        (msg, (host_off, sni_host.len()))
    }
}

/// Assemble the TLS TCP payload from record specs wrapping the ClientHello.
pub fn render_tls(
    cfg: &ClientHelloConfig,
    records: &[TlsRecordSpec],
    domain: &str,
    padded_len: usize,
) -> AppMessage {
    let legacy = cfg.ch_version.as_deref().map(|v| hex_u16(v, 0x0303)).unwrap_or(0x0303);
    let prefix = cfg.sni_prefix.as_deref().unwrap_or("");
    let suffix = cfg.sni_suffix.as_deref().unwrap_or("");

    let default_records = [TlsRecordSpec::default()];
    let records: &[TlsRecordSpec] = if records.is_empty() { &default_records } else { records };

    // Locate which record carries the hostname to compute the final span;
    // alignment is resolved assuming the hostname lies in the first record.
    let (ch, ch_span) = build_client_hello(domain, prefix, suffix, padded_len, legacy, 5);

    let mut out = Vec::new();
    let mut span = (0usize, 0usize);
    for r in records {
        let payload: Vec<u8> = if r.payload_type == "clienthello" {
            let start = r.offset.max(0) as usize;
            let end = if r.length < 0 {
                ch.len()
            } else {
                (start + r.length as usize).min(ch.len())
            };
            let start = start.min(ch.len());
            let end = end.max(start);
            if (start..end).contains(&ch_span.0) {
                span = (out.len() + 5 + (ch_span.0 - start), ch_span.1);
            }
            ch[start..end].to_vec()
        } else {
            hex::decode(&r.payload_type).unwrap_or_default()
        };
        out.push(hex_u8(&r.content_type, 0x16));
        out.extend_from_slice(&hex_u16(&r.record_version, 0x0301).to_be_bytes());
        out.extend_from_slice(&(payload.len() as u16).to_be_bytes());
        out.extend_from_slice(&payload);
    }
    AppMessage { bytes: out, domain_span: span }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packet::ones_complement_checksum;

    #[test]
    fn http_domain_region_is_aligned_and_even() {
        let pair = DomainPair::new("ok.test", "blocked.example.com");
        let m = render_http(HTTP_REQUEST_TEMPLATE, &pair.test, &pair.control, "", "", pair.padded_len());
        assert_eq!(m.domain_span.0 % 2, 0);
        assert_eq!(m.domain_span.1 % 2, 0);
        let region = &m.bytes[m.domain_span.0..m.domain_span.0 + m.domain_span.1];
        assert!(region.starts_with(b"blocked.example.com"));
    }

    #[test]
    fn control_and_test_renders_have_equal_length() {
        let pair = DomainPair::new("ok.test", "blocked.example.com");
        let c = render_http(HTTP_REQUEST_TEMPLATE, &pair.control, &pair.control, "", "", pair.padded_len());
        let t = render_http(HTTP_REQUEST_TEMPLATE, &pair.test, &pair.control, "", "", pair.padded_len());
        assert_eq!(c.bytes.len(), t.bytes.len());
        assert_eq!(c.domain_span, t.domain_span);
        // The two renders differ only inside the padded domain region.
        for (i, (a, b)) in c.bytes.iter().zip(&t.bytes).enumerate() {
            if a != b {
                assert!(i >= c.domain_span.0 && i < c.domain_span.0 + c.domain_span.1);
            }
        }
    }

    #[test]
    fn reversal_preserves_sum() {
        let pair = DomainPair::new("ok.test", "blocked.example.com");
        let m = render_http(HTTP_REQUEST_TEMPLATE, &pair.test, &pair.control, "", "", pair.padded_len());
        let rev = m.reversed();
        assert_ne!(rev, m.bytes);
        assert_eq!(
            ones_complement_checksum(&m.bytes, &[]),
            ones_complement_checksum(&rev, &[])
        );
    }

    #[test]
    fn tls_hostname_is_aligned_and_present() {
        let pair = DomainPair::new("ok.test", "blocked.example.com");
        let m = render_tls(&ClientHelloConfig::default(), &[], &pair.test, pair.padded_len());
        assert_eq!(m.domain_span.0 % 2, 0);
        assert_eq!(m.domain_span.1 % 2, 0);
        let region = &m.bytes[m.domain_span.0..m.domain_span.0 + m.domain_span.1];
        assert!(region.starts_with(b"blocked.example.com"));
        assert_eq!(m.bytes[0], 0x16);
        assert_eq!(&m.bytes[1..3], &[0x03, 0x01]);
    }

    #[test]
    fn tls_control_test_equal_length() {
        let pair = DomainPair::new("ok.test", "blocked.example.com");
        let c = render_tls(&ClientHelloConfig::default(), &[], &pair.control, pair.padded_len());
        let t = render_tls(&ClientHelloConfig::default(), &[], &pair.test, pair.padded_len());
        assert_eq!(c.bytes.len(), t.bytes.len());
        assert_eq!(c.domain_span, t.domain_span);
    }
}
