use std::io::{BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use super::protocol::{ErrorCode, WireMessage, WireObject, WirePerceived};

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("server closed the connection")]
    Closed,
    #[error("unexpected reply: {0}")]
    Protocol(String),
    #[error("server error {code}: {message}")]
    Server { code: ErrorCode, message: String },
}

/// Blocking client for one server session.
pub struct PemClient {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    buf: String,
}

impl PemClient {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self, ClientError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        stream.set_read_timeout(Some(Duration::from_secs(30)))?;
        Ok(Self {
            reader: BufReader::new(stream.try_clone()?),
            writer: stream,
            buf: String::new(),
        })
    }

    /// Sends a raw line and returns the raw reply line, newline included.
    pub fn request_line(&mut self, line: &str) -> Result<String, ClientError> {
        self.writer.write_all(line.as_bytes())?;
        if !line.ends_with('\n') {
            self.writer.write_all(b"\n")?;
        }
        self.buf.clear();
        if self.reader.read_line(&mut self.buf)? == 0 {
            return Err(ClientError::Closed);
        }
        Ok(self.buf.clone())
    }

    pub fn request(&mut self, msg: &WireMessage) -> Result<WireMessage, ClientError> {
        let reply = self.request_line(&msg.to_line())?;
        let reply = WireMessage::parse(&reply).map_err(|e| ClientError::Protocol(format!("{e}: {}", reply.trim_end())))?;
        match reply {
            WireMessage::Error { code, message } => Err(ClientError::Server { code, message }),
            other => Ok(other),
        }
    }

    fn expect_ack(&mut self, msg: &WireMessage, of: &str) -> Result<(), ClientError> {
        match self.request(msg)? {
            WireMessage::Ack { of: got } if got == of => Ok(()),
            other => Err(ClientError::Protocol(format!("{other:?}"))),
        }
    }

    pub fn init(&mut self, model: &str, seed: u64, rate_hz: f64) -> Result<(), ClientError> {
        let msg = WireMessage::Init {
            model: model.to_string(),
            seed,
            rate_hz,
        };
        self.expect_ack(&msg, "init")
    }

    pub fn frame(&mut self, t: f64, objects: Vec<WireObject>) -> Result<Vec<WirePerceived>, ClientError> {
        match self.request(&WireMessage::Frame { t, objects })? {
            WireMessage::Response { t: rt, objects } if rt == t => Ok(objects),
            other => Err(ClientError::Protocol(format!("{other:?}"))),
        }
    }

    pub fn reset(&mut self) -> Result<(), ClientError> {
        self.expect_ack(&WireMessage::Reset {}, "reset")
    }

    pub fn shutdown(mut self) -> Result<(), ClientError> {
        self.expect_ack(&WireMessage::Shutdown {}, "shutdown")
    }
}
