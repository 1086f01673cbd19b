//! Minimal netfilter userspace-queue client over a raw netlink socket.
//!
//! Only what the emulator needs: bind a queue, receive packet ids and
//! lengths, and send accept/drop verdicts. Operating it requires
//! CAP_NET_ADMIN and matching firewall rules.

use std::collections::VecDeque;
use std::io;
use std::os::fd::{AsRawFd, FromRawFd, OwnedFd};
use std::time::Duration;

use super::capture::{CaptureAdapter, CaptureError, RawPacket, Verdict};

const NLMSG_HDRLEN: usize = 16;
const NFGEN_HDRLEN: usize = 4;
const NLA_HDRLEN: usize = 4;
/// Bytes of each packet copied to userspace; lengths come from CAP_LEN.
const COPY_RANGE: u32 = 128;
const NF_DROP: u32 = 0;
const NF_ACCEPT: u32 = 1;

fn align4(n: usize) -> usize {
    (n + 3) & !3
}

/// Builder for one netfilter-queue netlink message.
#[derive(Debug)]
struct Message {
    buf: Vec<u8>,
}

impl Message {
    fn new(msg_type: u16, queue: u16, ack: bool) -> Self {
        let mut buf = vec![0u8; NLMSG_HDRLEN + NFGEN_HDRLEN];
        let ty = ((libc::NFNL_SUBSYS_QUEUE as u16) << 8) | msg_type;
        let mut flags = libc::NLM_F_REQUEST as u16;
        if ack {
            flags |= libc::NLM_F_ACK as u16;
        }
        buf[4..6].copy_from_slice(&ty.to_ne_bytes());
        buf[6..8].copy_from_slice(&flags.to_ne_bytes());
        buf[16] = libc::AF_UNSPEC as u8;
        buf[17] = libc::NFNETLINK_V0 as u8;
        buf[18..20].copy_from_slice(&queue.to_be_bytes());
        Self { buf }
    }

    fn attr(mut self, ty: u16, payload: &[u8]) -> Self {
        let len = NLA_HDRLEN + payload.len();
        self.buf.extend_from_slice(&(len as u16).to_ne_bytes());
        self.buf.extend_from_slice(&ty.to_ne_bytes());
        self.buf.extend_from_slice(payload);
        self.buf.resize(align4(self.buf.len()), 0);
        self
    }

    fn finish(mut self) -> Vec<u8> {
        let len = self.buf.len() as u32;
        self.buf[0..4].copy_from_slice(&len.to_ne_bytes());
        self.buf
    }
}

fn config_cmd(queue: u16, cmd: u8) -> Vec<u8> {
    Message::new(libc::NFQNL_MSG_CONFIG as u16, queue, true)
        .attr(libc::NFQA_CFG_CMD as u16, &[cmd, 0, 0, 0])
        .finish()
}

fn config_params(queue: u16, range: u32) -> Vec<u8> {
    let mut p = range.to_be_bytes().to_vec();
    p.push(libc::NFQNL_COPY_PACKET as u8);
    Message::new(libc::NFQNL_MSG_CONFIG as u16, queue, true)
        .attr(libc::NFQA_CFG_PARAMS as u16, &p)
        .finish()
}

fn verdict_msg(queue: u16, kernel_id: u32, verdict: Verdict) -> Vec<u8> {
    let code = match verdict {
        Verdict::Release => NF_ACCEPT,
        Verdict::Drop => NF_DROP,
    };
    let mut p = code.to_be_bytes().to_vec();
    p.extend_from_slice(&kernel_id.to_be_bytes());
    Message::new(libc::NFQNL_MSG_VERDICT as u16, queue, false)
        .attr(libc::NFQA_VERDICT_HDR as u16, &p)
        .finish()
}

#[derive(Debug, PartialEq)]
enum Parsed {
    Packet(RawPacket),
    Ack,
    Error(i32),
    Other,
}

/// Split a receive buffer into netlink messages and decode each.
fn parse_batch(mut data: &[u8]) -> Vec<Parsed> {
    let mut out = Vec::new();
    while data.len() >= NLMSG_HDRLEN {
        let len = u32::from_ne_bytes(data[0..4].try_into().unwrap()) as usize;
        if len < NLMSG_HDRLEN || len > data.len() {
            break;
        }
        let ty = u16::from_ne_bytes(data[4..6].try_into().unwrap());
        let body = &data[NLMSG_HDRLEN..len];
        out.push(match i32::from(ty) {
            libc::NLMSG_ERROR => {
                let errno = body
                    .get(0..4)
                    .map(|b| i32::from_ne_bytes(b.try_into().unwrap()))
                    .unwrap_or(0);
                if errno == 0 {
                    Parsed::Ack
                } else {
                    Parsed::Error(-errno)
                }
            }
            libc::NLMSG_DONE => Parsed::Ack,
            _ if ty & 0xff == libc::NFQNL_MSG_PACKET as u16 && body.len() >= NFGEN_HDRLEN => {
                parse_packet(&body[NFGEN_HDRLEN..]).map_or(Parsed::Other, Parsed::Packet)
            }
            _ => Parsed::Other,
        });
        data = &data[align4(len).min(data.len())..];
    }
    out
}

fn parse_packet(mut attrs: &[u8]) -> Option<RawPacket> {
    let mut kernel_id = None;
    let mut payload_len = 0usize;
    let mut cap_len = None;
    while attrs.len() >= NLA_HDRLEN {
        let len = u16::from_ne_bytes(attrs[0..2].try_into().unwrap()) as usize;
        let ty = u16::from_ne_bytes(attrs[2..4].try_into().unwrap()) & libc::NLA_TYPE_MASK as u16;
        if len < NLA_HDRLEN || len > attrs.len() {
            break;
        }
        let p = &attrs[NLA_HDRLEN..len];
        match i32::from(ty) {
            libc::NFQA_PACKET_HDR if p.len() >= 4 => {
                kernel_id = Some(u32::from_be_bytes(p[0..4].try_into().unwrap()));
            }
            libc::NFQA_PAYLOAD => payload_len = p.len(),
            libc::NFQA_CAP_LEN if p.len() >= 4 => {
                cap_len = Some(u32::from_be_bytes(p[0..4].try_into().unwrap()) as usize);
            }
            _ => {}
        }
        attrs = &attrs[align4(len).min(attrs.len())..];
    }
    Some(RawPacket {
        kernel_id: kernel_id?,
        size_bytes: cap_len.unwrap_or(payload_len),
        timestamp_ms: None,
    })
}

/// A bound netfilter queue.
#[derive(Debug)]
pub struct NfQueue {
    fd: OwnedFd,
    queue: u16,
    buf: Vec<u8>,
    pending: VecDeque<RawPacket>,
}

impl NfQueue {
    pub fn open(queue: u16) -> Result<Self, CaptureError> {
        let init = |e: io::Error| CaptureError::Init {
            queue,
            reason: e.to_string(),
        };
        // SAFETY: plain socket(2) call; the descriptor is owned below.
        let raw = unsafe { libc::socket(libc::AF_NETLINK, libc::SOCK_RAW | libc::SOCK_CLOEXEC, libc::NETLINK_NETFILTER) };
        if raw < 0 {
            return Err(init(io::Error::last_os_error()));
        }
        // SAFETY: `raw` is a fresh, valid descriptor.
        let fd = unsafe { OwnedFd::from_raw_fd(raw) };
        // SAFETY: zeroed sockaddr_nl is a valid value; bind reads it only.
        let rc = unsafe {
            let mut addr: libc::sockaddr_nl = std::mem::zeroed();
            addr.nl_family = libc::AF_NETLINK as _;
            libc::bind(
                fd.as_raw_fd(),
                &addr as *const libc::sockaddr_nl as *const libc::sockaddr,
                std::mem::size_of::<libc::sockaddr_nl>() as _,
            )
        };
        if rc < 0 {
            return Err(init(io::Error::last_os_error()));
        }
        let mut q = Self {
            fd,
            queue,
            buf: vec![0u8; 65536],
            pending: VecDeque::new(),
        };
        q.request(&config_cmd(queue, libc::NFQNL_CFG_CMD_BIND as u8)).map_err(init)?;
        q.request(&config_params(queue, COPY_RANGE)).map_err(init)?;
        Ok(q)
    }

    fn send(&self, msg: &[u8]) -> io::Result<()> {
        // SAFETY: `msg` is a valid buffer; the kernel address is zeroed.
        let rc = unsafe {
            let mut addr: libc::sockaddr_nl = std::mem::zeroed();
            addr.nl_family = libc::AF_NETLINK as _;
            libc::sendto(
                self.fd.as_raw_fd(),
                msg.as_ptr().cast(),
                msg.len(),
                0,
                &addr as *const libc::sockaddr_nl as *const libc::sockaddr,
                std::mem::size_of::<libc::sockaddr_nl>() as _,
            )
        };
        if rc < 0 {
            Err(io::Error::last_os_error())
        } else {
            Ok(())
        }
    }

    /// Receive one datagram, waiting at most `timeout`. Packets are queued.
    fn recv_batch(&mut self, timeout: Duration) -> io::Result<Vec<Parsed>> {
        let mut pfd = libc::pollfd {
            fd: self.fd.as_raw_fd(),
            events: libc::POLLIN,
            revents: 0,
        };
        let ms = timeout.as_millis().min(i32::MAX as u128) as i32;
        // SAFETY: one valid pollfd.
        let rc = unsafe { libc::poll(&mut pfd, 1, ms) };
        if rc < 0 {
            let e = io::Error::last_os_error();
            return if e.kind() == io::ErrorKind::Interrupted { Ok(Vec::new()) } else { Err(e) };
        }
        if rc == 0 {
            return Ok(Vec::new());
        }
        // SAFETY: `buf` is writable for its full length.
        let n = unsafe {
            libc::recv(
                self.fd.as_raw_fd(),
                self.buf.as_mut_ptr().cast(),
                self.buf.len(),
                libc::MSG_DONTWAIT,
            )
        };
        if n < 0 {
            let e = io::Error::last_os_error();
            return match e.kind() {
                io::ErrorKind::WouldBlock | io::ErrorKind::Interrupted => Ok(Vec::new()),
                _ => Err(e),
            };
        }
        let parsed = parse_batch(&self.buf[..n as usize]);
        Ok(parsed
            .into_iter()
            .filter_map(|p| match p {
                Parsed::Packet(raw) => {
                    self.pending.push_back(raw);
                    None
                }
                other => Some(other),
            })
            .collect())
    }

    /// Send a request and wait for its acknowledgement.
    fn request(&mut self, msg: &[u8]) -> io::Result<()> {
        self.send(msg)?;
        for _ in 0..100 {
            for p in self.recv_batch(Duration::from_millis(50))? {
                match p {
                    Parsed::Ack => return Ok(()),
                    Parsed::Error(errno) => return Err(io::Error::from_raw_os_error(errno)),
                    _ => {}
                }
            }
        }
        Err(io::Error::new(io::ErrorKind::TimedOut, "no netlink acknowledgement"))
    }
}

impl CaptureAdapter for NfQueue {
    fn queue(&self) -> u16 {
        self.queue
    }

    fn recv(&mut self, timeout: Duration) -> Result<Option<RawPacket>, CaptureError> {
        if self.pending.is_empty() {
            for p in self.recv_batch(timeout)? {
                if let Parsed::Error(errno) = p {
                    log::warn!("queue {}: netlink error {errno}", self.queue);
                }
            }
        }
        Ok(self.pending.pop_front())
    }

    fn verdict(&mut self, kernel_id: u32, verdict: Verdict) -> Result<(), CaptureError> {
        self.send(&verdict_msg(self.queue, kernel_id, verdict))?;
        Ok(())
    }
}

impl Drop for NfQueue {
    fn drop(&mut self) {
        let _ = self.send(&config_cmd(self.queue, libc::NFQNL_CFG_CMD_UNBIND as u8));
    }
}
