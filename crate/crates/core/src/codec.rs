//! iBeacon advertising payloads.
//!
//! A node advertises a [`BeaconConfig`] as a 30-octet legacy advertising
//! payload made of two AD structures:
//!
//! ```text
//! 02 01 06                  Flags (LE General Discoverable, BR/EDR not supported)
//! 1A FF 4C 00 02 15         Manufacturer specific, Apple company id, iBeacon type/len
//! <uuid:16> <major:2 BE> <minor:2 BE> <measured power:1>
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Maximum length of a legacy advertising payload.
pub const MAX_ADV_PAYLOAD: usize = 31;

/// Length of every frame produced by [`encode_ibeacon`].
pub const IBEACON_FRAME_LEN: usize = 30;

/// Calibrated RSSI at 1 m used when a configuration does not specify one.
pub const DEFAULT_MEASURED_POWER: i8 = -59;

const IBEACON_HEADER: [u8; 9] = [0x02, 0x01, 0x06, 0x1A, 0xFF, 0x4C, 0x00, 0x02, 0x15];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("malformed-uuid: {0:?}")]
    MalformedUuid(String),
    #[error("advertising payload of {0} octets exceeds the 31-octet limit")]
    FrameTooLong(usize),
    #[error("malformed frame hex: {0}")]
    MalformedHex(String),
}

/// The 16-byte proximity namespace of an iBeacon.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ProximityUuid(pub [u8; 16]);

impl ProximityUuid {
    pub const fn from_bytes(bytes: [u8; 16]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }
}

impl fmt::Display for ProximityUuid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, b) in self.0.iter().enumerate() {
            if matches!(i, 4 | 6 | 8 | 10) {
                f.write_str("-")?;
            }
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for ProximityUuid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ProximityUuid({self})")
    }
}

impl FromStr for ProximityUuid {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_uuid(s)
    }
}

impl Serialize for ProximityUuid {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ProximityUuid {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        parse_uuid(&s).map_err(serde::de::Error::custom)
    }
}

/// Parses a hyphenated `8-4-4-4-12` hex UUID, case-insensitively.
pub fn parse_uuid(text: &str) -> Result<ProximityUuid, CodecError> {
    const GROUPS: [usize; 5] = [8, 4, 4, 4, 12];
    let malformed = || CodecError::MalformedUuid(text.to_owned());

    let parts: Vec<&str> = text.split('-').collect();
    if parts.len() != GROUPS.len() {
        return Err(malformed());
    }
    let mut bytes = [0u8; 16];
    let mut at = 0;
    for (part, &len) in parts.iter().zip(GROUPS.iter()) {
        if part.len() != len || !part.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(malformed());
        }
        hex::decode_to_slice(part, &mut bytes[at..at + len / 2]).map_err(|_| malformed())?;
        at += len / 2;
    }
    Ok(ProximityUuid(bytes))
}

/// The identifier quadruple a node advertises for one profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BeaconConfig {
    pub uuid: ProximityUuid,
    pub major: u16,
    pub minor: u16,
    #[serde(rename = "power", default = "default_measured_power")]
    pub measured_power: i8,
}

fn default_measured_power() -> i8 {
    DEFAULT_MEASURED_POWER
}

impl BeaconConfig {
    pub fn new(uuid: ProximityUuid, major: u16, minor: u16, measured_power: i8) -> Self {
        Self {
            uuid,
            major,
            minor,
            measured_power,
        }
    }
}

/// A raw legacy advertising payload, at most 31 octets.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct AdvertisingFrame {
    buf: [u8; MAX_ADV_PAYLOAD],
    len: u8,
}

impl AdvertisingFrame {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CodecError> {
        if bytes.len() > MAX_ADV_PAYLOAD {
            return Err(CodecError::FrameTooLong(bytes.len()));
        }
        let mut buf = [0u8; MAX_ADV_PAYLOAD];
        buf[..bytes.len()].copy_from_slice(bytes);
        Ok(Self {
            buf,
            len: bytes.len() as u8,
        })
    }

    pub fn empty() -> Self {
        Self {
            buf: [0; MAX_ADV_PAYLOAD],
            len: 0,
        }
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.buf[..self.len as usize]
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Lowercase hex without separators, as written to interaction logs.
    pub fn to_hex(&self) -> String {
        hex::encode(self.as_bytes())
    }

    pub fn from_hex(text: &str) -> Result<Self, CodecError> {
        let bytes = hex::decode(text).map_err(|e| CodecError::MalformedHex(e.to_string()))?;
        Self::from_bytes(&bytes)
    }
}

impl fmt::Debug for AdvertisingFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AdvertisingFrame({})", self.to_hex())
    }
}

pub fn encode_ibeacon(config: &BeaconConfig) -> AdvertisingFrame {
    let mut buf = [0u8; MAX_ADV_PAYLOAD];
    buf[..9].copy_from_slice(&IBEACON_HEADER);
    buf[9..25].copy_from_slice(&config.uuid.0);
    buf[25..27].copy_from_slice(&config.major.to_be_bytes());
    buf[27..29].copy_from_slice(&config.minor.to_be_bytes());
    buf[29] = config.measured_power as u8;
    AdvertisingFrame {
        buf,
        len: IBEACON_FRAME_LEN as u8,
    }
}

/// Decodes a frame produced by [`encode_ibeacon`].
///
/// Returns `None` for anything else: wrong length, any header octet that
/// differs, or extra AD structures.
pub fn decode_ibeacon(frame: &[u8]) -> Option<BeaconConfig> {
    if frame.len() != IBEACON_FRAME_LEN || frame[..9] != IBEACON_HEADER {
        return None;
    }
    let mut uuid = [0u8; 16];
    uuid.copy_from_slice(&frame[9..25]);
    Some(BeaconConfig {
        uuid: ProximityUuid(uuid),
        major: u16::from_be_bytes([frame[25], frame[26]]),
        minor: u16::from_be_bytes([frame[27], frame[28]]),
        measured_power: frame[29] as i8,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seq_uuid() -> ProximityUuid {
        let mut b = [0u8; 16];
        for (i, v) in b.iter_mut().enumerate() {
            *v = i as u8;
        }
        ProximityUuid(b)
    }

    #[test]
    fn all_zero_config_encodes_to_header_and_zeros() {
        let frame = encode_ibeacon(&BeaconConfig::new(ProximityUuid::default(), 0, 0, 0));
        let mut expected = vec![0x02, 0x01, 0x06, 0x1A, 0xFF, 0x4C, 0x00, 0x02, 0x15];
        expected.extend(std::iter::repeat_n(0, 21));
        assert_eq!(frame.as_bytes(), expected.as_slice());
        assert_eq!(
            decode_ibeacon(frame.as_bytes()),
            Some(BeaconConfig::new(ProximityUuid::default(), 0, 0, 0))
        );
    }

    #[test]
    fn hand_assembled_frame() {
        let frame = encode_ibeacon(&BeaconConfig::new(seq_uuid(), 0x0102, 0x0304, -59));
        let expected = "0201061aff4c000215\
                        000102030405060708090a0b0c0d0e0f\
                        0102\
                        0304\
                        c5";
        assert_eq!(frame.to_hex(), expected);
    }

    #[test]
    fn major_is_big_endian() {
        let frame = encode_ibeacon(&BeaconConfig::new(ProximityUuid::default(), 1, 0, 0));
        assert_eq!(&frame.as_bytes()[25..27], &[0x00, 0x01]);
    }

    #[test]
    fn rejects_empty_and_corrupted_company_id() {
        assert_eq!(decode_ibeacon(&[]), None);
        let mut bytes = encode_ibeacon(&BeaconConfig::new(ProximityUuid::default(), 0, 0, 0))
            .as_bytes()
            .to_vec();
        bytes[6] = 0x01;
        assert_eq!(decode_ibeacon(&bytes), None);
    }

    #[test]
    fn rejects_every_single_header_octet_mutation() {
        let valid = encode_ibeacon(&BeaconConfig::new(seq_uuid(), 7, 9, -40));
        for pos in 0..9 {
            for delta in 1..=255u8 {
                let mut bytes = valid.as_bytes().to_vec();
                bytes[pos] = bytes[pos].wrapping_add(delta);
                assert_eq!(decode_ibeacon(&bytes), None, "pos {pos} delta {delta}");
            }
        }
    }

    #[test]
    fn rejects_trailing_ad_structure() {
        let mut bytes = encode_ibeacon(&BeaconConfig::new(seq_uuid(), 1, 2, -59))
            .as_bytes()
            .to_vec();
        bytes.push(0x00);
        assert_eq!(decode_ibeacon(&bytes), None);
    }

    #[test]
    fn frame_length_limit() {
        assert!(AdvertisingFrame::from_bytes(&[0u8; 31]).is_ok());
        assert_eq!(
            AdvertisingFrame::from_bytes(&[0u8; 32]),
            Err(CodecError::FrameTooLong(32))
        );
    }

    #[test]
    fn uuid_parsing() {
        assert_eq!(
            parse_uuid("00000000-0000-0000-0000-000000000000").unwrap(),
            ProximityUuid([0; 16])
        );
        assert_eq!(
            parse_uuid("FFFFFFFF-FFFF-FFFF-FFFF-FFFFFFFFFFFF").unwrap(),
            ProximityUuid([0xFF; 16])
        );
        assert_eq!(
            parse_uuid("00010203-0405-0607-0809-0a0B0c0D0e0F").unwrap(),
            seq_uuid()
        );
        for bad in [
            "000102030405-0607-0809-0a0b-0c0d0e0f",
            "00010203-0405-0607-0809-0a0b0c0d0e0",
            "00010203-0405-0607-0809-0a0b0c0d0e0g",
            "000102030405060708090a0b0c0d0e0f",
            "{00010203-0405-0607-0809-0a0b0c0d0e0f}",
            "+0010203-0405-0607-0809-0a0b0c0d0e0f",
            "",
        ] {
            assert!(
                matches!(parse_uuid(bad), Err(CodecError::MalformedUuid(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn uuid_text_round_trip() {
        let text = "00010203-0405-0607-0809-0a0b0c0d0e0f";
        assert_eq!(seq_uuid().to_string(), text);
        assert_eq!(text.parse::<ProximityUuid>().unwrap(), seq_uuid());
    }

    #[test]
    fn config_json_uses_power_key() {
        let cfg = BeaconConfig::new(seq_uuid(), 1, 7, -59);
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(
            json,
            r#"{"uuid":"00010203-0405-0607-0809-0a0b0c0d0e0f","major":1,"minor":7,"power":-59}"#
        );
        let without_power: BeaconConfig = serde_json::from_str(
            r#"{"uuid":"00010203-0405-0607-0809-0a0b0c0d0e0f","major":1,"minor":7}"#,
        )
        .unwrap();
        assert_eq!(without_power.measured_power, DEFAULT_MEASURED_POWER);
    }

    fn any_config() -> impl Strategy<Value = BeaconConfig> {
        (any::<[u8; 16]>(), any::<u16>(), any::<u16>(), any::<i8>())
            .prop_map(|(u, ma, mi, p)| BeaconConfig::new(ProximityUuid(u), ma, mi, p))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn round_trip(cfg in any_config()) {
            let frame = encode_ibeacon(&cfg);
            prop_assert_eq!(frame.len(), IBEACON_FRAME_LEN);
            prop_assert_eq!(decode_ibeacon(frame.as_bytes()), Some(cfg));
            prop_assert_eq!(AdvertisingFrame::from_hex(&frame.to_hex()).unwrap(), frame);
        }

        #[test]
        fn decode_is_total(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
            let _ = decode_ibeacon(&bytes);
        }
    }
}
