//! Message-kind codes and element tags for TLV bodies.

macro_rules! msg_kinds {
    ($($variant:ident = $code:literal => $name:literal,)*) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum MsgKind {
            $($variant,)*
        }

        impl MsgKind {
            pub const ALL: &'static [MsgKind] = &[$(MsgKind::$variant,)*];

            pub fn code(self) -> u16 {
                match self {
                    $(MsgKind::$variant => $code,)*
                }
            }

            pub fn from_code(code: u16) -> Option<Self> {
                match code {
                    $($code => Some(MsgKind::$variant),)*
                    _ => None,
                }
            }

            pub fn name(self) -> &'static str {
                match self {
                    $(MsgKind::$variant => $name,)*
                }
            }

            pub fn from_name(name: &str) -> Option<Self> {
                match name {
                    $($name => Some(MsgKind::$variant),)*
                    _ => None,
                }
            }
        }
    };
}

msg_kinds! {
    // SBI
    NfRegisterReq = 0x0101 => "NF_REGISTER_REQ",
    NfRegisterResp = 0x0102 => "NF_REGISTER_RESP",
    NfHeartbeatReq = 0x0103 => "NF_HEARTBEAT_REQ",
    NfHeartbeatResp = 0x0104 => "NF_HEARTBEAT_RESP",
    NfStatusSubscribeReq = 0x0105 => "NF_STATUS_SUBSCRIBE_REQ",
    NfStatusSubscribeResp = 0x0106 => "NF_STATUS_SUBSCRIBE_RESP",
    NfStatusNotify = 0x0107 => "NF_STATUS_NOTIFY",
    NfStatusNotifyAck = 0x0108 => "NF_STATUS_NOTIFY_ACK",
    NfDiscoverReq = 0x0109 => "NF_DISCOVER_REQ",
    NfDiscoverResp = 0x010A => "NF_DISCOVER_RESP",
    NfDeregisterReq = 0x010B => "NF_DEREGISTER_REQ",
    NfDeregisterResp = 0x010C => "NF_DEREGISTER_RESP",
    UeAuthReq = 0x0111 => "UE_AUTH_REQ",
    UeAuthResp = 0x0112 => "UE_AUTH_RESP",
    SdmGetReq = 0x0113 => "SDM_GET_REQ",
    SdmGetResp = 0x0114 => "SDM_GET_RESP",
    UdrQueryReq = 0x0115 => "UDR_QUERY_REQ",
    UdrQueryResp = 0x0116 => "UDR_QUERY_RESP",
    AmPolicyReq = 0x0117 => "AM_POLICY_REQ",
    AmPolicyResp = 0x0118 => "AM_POLICY_RESP",
    SmContextCreateReq = 0x0119 => "SM_CONTEXT_CREATE_REQ",
    SmContextCreateResp = 0x011A => "SM_CONTEXT_CREATE_RESP",
    AnalyticsSubscribeReq = 0x0121 => "ANALYTICS_SUBSCRIBE_REQ",
    AnalyticsSubscribeResp = 0x0122 => "ANALYTICS_SUBSCRIBE_RESP",
    AnalyticsNotify = 0x0123 => "ANALYTICS_NOTIFY",
    // NGAP
    NgSetupReq = 0x0201 => "NG_SETUP_REQ",
    NgSetupResp = 0x0202 => "NG_SETUP_RESP",
    NgSetupFailure = 0x0203 => "NG_SETUP_FAILURE",
    InitialUeMessage = 0x0204 => "INITIAL_UE_MESSAGE",
    DownlinkNasTransport = 0x0205 => "DOWNLINK_NAS_TRANSPORT",
    UplinkNasTransport = 0x0206 => "UPLINK_NAS_TRANSPORT",
    PduSessionResourceSetupReq = 0x0207 => "PDU_SESSION_RESOURCE_SETUP_REQ",
    PduSessionResourceSetupResp = 0x0208 => "PDU_SESSION_RESOURCE_SETUP_RESP",
    NgKeepalive = 0x0209 => "NG_KEEPALIVE",
    NgKeepaliveAck = 0x020A => "NG_KEEPALIVE_ACK",
    // NAS-5GS
    RegistrationRequest = 0x0301 => "REGISTRATION_REQUEST",
    RegistrationAccept = 0x0302 => "REGISTRATION_ACCEPT",
    RegistrationReject = 0x0303 => "REGISTRATION_REJECT",
    PduSessionEstablishmentRequest = 0x0304 => "PDU_SESSION_ESTABLISHMENT_REQUEST",
    PduSessionEstablishmentAccept = 0x0305 => "PDU_SESSION_ESTABLISHMENT_ACCEPT",
    PduSessionEstablishmentReject = 0x0306 => "PDU_SESSION_ESTABLISHMENT_REJECT",
    // PFCP
    AssociationSetupReq = 0x0401 => "PFCP_ASSOCIATION_SETUP_REQ",
    AssociationSetupResp = 0x0402 => "PFCP_ASSOCIATION_SETUP_RESP",
    SessionEstablishmentReq = 0x0403 => "PFCP_SESSION_ESTABLISHMENT_REQ",
    SessionEstablishmentResp = 0x0404 => "PFCP_SESSION_ESTABLISHMENT_RESP",
    // RLS
    RlsNas = 0x0601 => "RLS_NAS",
    RlsData = 0x0602 => "RLS_DATA",
    // Application
    AppGet = 0x0701 => "GET",
    AppAck = 0x0702 => "ACK",
    AppSegment = 0x0703 => "SEGMENT",
    AppError = 0x0704 => "ERROR",
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u16)]
pub enum Tag {
    NfId = 0x01,
    NfType = 0x02,
    Addr = 0x03,
    Status = 0x04,
    UeId = 0x05,
    Nas = 0x06,
    Cause = 0x07,
    UeIp = 0x08,
    Teid = 0x09,
    PeerAddr = 0x0A,
    GnbAddr = 0x0B,
    Seq = 0x0C,
    DocName = 0x0D,
    Offset = 0x0E,
    Data = 0x0F,
    TotalSize = 0x10,
    Pdu = 0x11,
    KpiKind = 0x12,
    Period = 0x13,
    Redundancy = 0x14,
    Tunnel = 0x15,
    Rule = 0x16,
    SessionId = 0x17,
    SecondaryGnb = 0x18,
    NfEntry = 0x19,
    Packets = 0x1A,
    Bytes = 0x1B,
    SubscriptionId = 0x1C,
    WindowStart = 0x1D,
    WindowEnd = 0x1E,
    Eliminate = 0x1F,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn codes_and_names_are_unique() {
        let codes: HashSet<_> = MsgKind::ALL.iter().map(|k| k.code()).collect();
        let names: HashSet<_> = MsgKind::ALL.iter().map(|k| k.name()).collect();
        assert_eq!(codes.len(), MsgKind::ALL.len());
        assert_eq!(names.len(), MsgKind::ALL.len());
        for k in MsgKind::ALL {
            assert_eq!(MsgKind::from_code(k.code()), Some(*k));
            assert_eq!(MsgKind::from_name(k.name()), Some(*k));
        }
    }
}
