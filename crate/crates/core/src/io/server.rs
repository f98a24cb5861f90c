//! TCP streaming server: one thread and one [`StreamState`] per connection,
//! sharing an immutable checkpoint and calibration.

use std::collections::VecDeque;
use std::io::{self, BufWriter, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use super::wire::{decode_frame, frame_len, Handshake, WirePose, HANDSHAKE_LEN, WIRE_VERSION};
use crate::calibration::{calibrate_frame, CalibrationState};
use crate::error::{Error, Result};
use crate::inference::{StreamState, WindowConfig};
use crate::network::Checkpoint;

/// Everything a session needs, shared read-only across sessions.
#[derive(Debug)]
pub struct SessionContext {
    pub checkpoint: Checkpoint,
    pub calibration: CalibrationState,
    pub window: WindowConfig,
}

impl SessionContext {
    pub fn new(
        checkpoint: Checkpoint,
        calibration: CalibrationState,
        window: WindowConfig,
    ) -> Result<Self> {
        checkpoint.validate()?;
        if u8::try_from(window.future).is_err() {
            return Err(Error::invalid(format!(
                "future window {} does not fit the handshake",
                window.future
            )));
        }
        Ok(Self {
            checkpoint,
            calibration,
            window,
        })
    }

    fn sensor_count(&self) -> usize {
        self.calibration.sensor_count()
    }
}

pub struct Server {
    listener: TcpListener,
    context: Arc<SessionContext>,
}

impl Server {
    pub fn bind(addr: impl ToSocketAddrs, context: SessionContext) -> Result<Self> {
        Ok(Self {
            listener: TcpListener::bind(addr)?,
            context: Arc::new(context),
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    /// Accepts connections forever, one handler thread each.
    pub fn run(self) -> Result<()> {
        for stream in self.listener.incoming() {
            let stream = match stream {
                Ok(s) => s,
                Err(e) => {
                    log::warn!("accept failed: {e}");
                    continue;
                }
            };
            let context = Arc::clone(&self.context);
            thread::spawn(move || {
                let peer = stream.peer_addr().ok();
                match handle_session(stream, &context) {
                    Ok(n) => log::info!("session {peer:?} closed after {n} frames"),
                    Err(e) => log::warn!("session {peer:?} ended: {e}"),
                }
            });
        }
        Ok(())
    }

    /// Runs [`Server::run`] on a background thread.
    pub fn spawn(self) -> JoinHandle<Result<()>> {
        thread::spawn(move || self.run())
    }
}

/// Reads exactly `buf.len()` bytes. `Ok(false)` on a clean end of stream
/// before the first byte.
fn read_message(stream: &mut impl Read, buf: &mut [u8]) -> Result<bool> {
    let mut filled = 0;
    while filled < buf.len() {
        match stream.read(&mut buf[filled..]) {
            Ok(0) if filled == 0 => return Ok(false),
            Ok(0) => {
                return Err(Error::Malformed {
                    format: "wire frame",
                    reason: format!("stream closed after {filled} of {} bytes", buf.len()),
                })
            }
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(true)
}

/// Serves one connection until the client closes it. Returns the number of
/// frames received.
pub fn handle_session(mut stream: TcpStream, context: &SessionContext) -> Result<usize> {
    stream.set_nodelay(true)?;
    let future = context.window.future as u8;
    let mut hello = [0u8; HANDSHAKE_LEN];
    if !read_message(&mut stream, &mut hello)? {
        return Ok(0);
    }
    let handshake = match Handshake::decode(&hello) {
        Ok(h) if h.version == WIRE_VERSION && h.sensor_count as usize == context.sensor_count() => {
            h
        }
        other => {
            stream.write_all(&[0, future])?;
            return Err(match other {
                Ok(h) => Error::invalid(format!(
                    "rejected handshake: version {}, {} sensors",
                    h.version, h.sensor_count
                )),
                Err(e) => e,
            });
        }
    };
    stream.write_all(&[1, future])?;

    let sensors = context.sensor_count();
    let mut buf = vec![0u8; frame_len(sensors)];
    let mut writer = BufWriter::new(stream.try_clone()?);
    let mut state = StreamState::new(context.window);
    let mut indices: VecDeque<u64> = VecDeque::with_capacity(context.window.future + 1);
    let mut received = 0;
    while read_message(&mut stream, &mut buf)? {
        let (index, raw) = decode_frame(&buf, sensors)?;
        received += 1;
        if indices.len() == context.window.future + 1 {
            indices.pop_front();
        }
        indices.push_back(index);
        let calibrated = calibrate_frame(&raw, &context.calibration)?;
        if let Some(e) = state.push_calibrated(&context.checkpoint, &calibrated)? {
            let sigma = handshake.wants_sigma().then_some(e.sigma.as_slice());
            let pose = WirePose::new(indices[0], &e.pose, sigma);
            writer.write_all(&pose.encode())?;
            writer.flush()?;
        }
    }
    Ok(received)
}

/// Blocking client used for replay and tests: sends every frame, then
/// collects poses until the server has answered all it will.
pub fn replay_frames(
    addr: impl ToSocketAddrs,
    frames: &[crate::sensor::SensorFrame],
    want_sigma: bool,
) -> Result<Vec<WirePose>> {
    let mut stream = TcpStream::connect(addr)?;
    stream.set_nodelay(true)?;
    let sensor_count = frames
        .first()
        .map_or(crate::kinematics::SENSOR_COUNT, |f| f.sensor_count());
    let sensor_count =
        u8::try_from(sensor_count).map_err(|_| Error::invalid("too many sensors"))?;
    stream.write_all(&Handshake::new(sensor_count, want_sigma).encode())?;
    let mut reply = [0u8; 2];
    if !read_message(&mut stream, &mut reply)? || reply[0] != 1 {
        return Err(Error::invalid("server rejected the handshake"));
    }
    let future = reply[1] as usize;
    let expected = frames.len().saturating_sub(future);
    let reader = stream.try_clone()?;
    let collector = thread::spawn(move || -> Result<Vec<WirePose>> {
        let mut reader = reader;
        let mut buf = vec![0u8; super::wire::pose_len(want_sigma)];
        let mut poses = Vec::with_capacity(expected);
        while poses.len() < expected && read_message(&mut reader, &mut buf)? {
            poses.push(WirePose::decode(&buf, want_sigma)?);
        }
        Ok(poses)
    });
    {
        let mut writer = BufWriter::new(&mut stream);
        for (i, f) in frames.iter().enumerate() {
            writer.write_all(&super::wire::encode_frame(i as u64, f))?;
        }
        writer.flush()?;
    }
    let poses = collector
        .join()
        .map_err(|_| Error::InternalInvariant("pose reader panicked".into()))??;
    stream.shutdown(std::net::Shutdown::Both).ok();
    Ok(poses)
}
